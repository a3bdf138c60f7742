#include "oscar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oscar/numerics.hpp"
#include "oscar/rng.hpp"

namespace oscar {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double median(Vec v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return (n % 2) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

VendiResult vendi_score(const Matrix& points, const KernelSpec& kernel) {
  const std::size_t m = points.rows;
  if (m == 0) throw TooFewPoints("vendi_score: empty point set");

  VendiResult res;
  SymMatrix K(m);
  if (kernel.kind == KernelSpec::Kind::linear) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        const double v = dot(points.row(i), points.row(j));
        K(i, j) = v;
        K(j, i) = v;
      }
  } else {
    double h = kernel.bandwidth;
    if (std::isnan(h)) {
      Vec dists;
      dists.reserve(m * (m - 1) / 2);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
          dists.push_back(std::sqrt(sq_dist(points.row(i), points.row(j))));
      h = median(std::move(dists));
      if (!(h > 0.0)) h = 1.0;  // degenerate set of duplicates
    }
    res.bandwidth_used = h;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        const double v = std::exp(-sq_dist(points.row(i), points.row(j)) /
                                  (2.0 * h * h));
        K(i, j) = v;
        K(j, i) = v;
      }
  }

  double tr = 0.0;
  for (std::size_t i = 0; i < m; ++i) tr += K(i, i);
  if (!(tr > 0.0)) {
    res.score = 1.0;  // all-zero features: one effective point
    return res;
  }
  for (double& v : K.a) v /= tr;

  const EigenDecomp eig = sym_eig(K);
  double entropy = 0.0;
  for (double lam : eig.eigenvalues) {
    if (lam > 0.0) entropy -= lam * std::log(lam);  // 0 log 0 = 0
  }
  res.score = std::exp(entropy);
  return res;
}

std::map<double, double> coverage_at(const Matrix& samples, const Matrix& centers,
                                     const Vec& taus) {
  std::map<double, double> out;
  const std::size_t kc = centers.rows;
  Vec nearest(kc, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < kc; ++c)
    for (std::size_t i = 0; i < samples.rows; ++i)
      nearest[c] = std::min(nearest[c],
                            std::sqrt(sq_dist(samples.row(i), centers.row(c))));
  for (double tau : taus) {
    std::size_t hit = 0;
    for (std::size_t c = 0; c < kc; ++c)
      if (nearest[c] <= tau) ++hit;
    out[tau] = static_cast<double>(hit) / static_cast<double>(kc);
  }
  return out;
}

double normalized_entropy(const Matrix& samples, const Matrix& centers) {
  const std::size_t kc = centers.rows;
  if (kc < 2) throw TooFewPoints("normalized_entropy: need >= 2 centers");
  std::vector<std::size_t> counts(kc, 0);
  for (std::size_t i = 0; i < samples.rows; ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(samples.row(i), centers.row(0));
    for (std::size_t c = 1; c < kc; ++c) {
      const double d = sq_dist(samples.row(i), centers.row(c));
      if (d < best_d) {  // strict: ties stay with the lowest index
        best_d = d;
        best = c;
      }
    }
    ++counts[best];
  }
  const double n = static_cast<double>(samples.rows);
  double H = 0.0;
  for (std::size_t c = 0; c < kc; ++c) {
    if (counts[c] == 0) continue;
    const double p = static_cast<double>(counts[c]) / n;
    H -= p * std::log(p);
  }
  return H / std::log(static_cast<double>(kc));
}

PrecisionRecall knn_precision_recall(const Matrix& generated, const Matrix& real,
                                     std::size_t k) {
  if (generated.rows <= k || real.rows <= k)
    throw TooFewPoints("knn_precision_recall: need more than k points per cloud");

  auto radii = [&](const Matrix& pts) {
    Vec r(pts.rows);
    Vec d(pts.rows - 1);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      std::size_t n = 0;
      for (std::size_t j = 0; j < pts.rows; ++j)
        if (j != i) d[n++] = sq_dist(pts.row(i), pts.row(j));
      std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
      r[i] = std::sqrt(d[k - 1]);
    }
    return r;
  };
  auto fraction_within = [&](const Matrix& from, const Matrix& to, const Vec& r) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < from.rows; ++i) {
      for (std::size_t j = 0; j < to.rows; ++j) {
        if (std::sqrt(sq_dist(from.row(i), to.row(j))) <= r[j]) {
          ++hit;
          break;
        }
      }
    }
    return static_cast<double>(hit) / static_cast<double>(from.rows);
  };

  PrecisionRecall pr;
  pr.k = k;
  pr.precision = fraction_within(generated, real, radii(real));
  pr.recall = fraction_within(real, generated, radii(generated));
  return pr;
}

Matrix kmeans_centers(const Matrix& points, std::size_t k, std::uint64_t seed,
                      std::size_t iters) {
  if (points.rows < k) throw TooFewPoints("kmeans_centers: fewer points than k");
  const std::size_t d = points.cols;
  Matrix centers(k, d);
  // Deterministic init: k distinct row picks.
  std::vector<std::size_t> picks;
  for (std::uint32_t draw = 0; picks.size() < k; ++draw) {
    const auto idx = static_cast<std::size_t>(
        rng::uniform(seed, rng::kMisc, 0, 0, draw) *
        static_cast<double>(points.rows));
    if (std::find(picks.begin(), picks.end(), idx) == picks.end())
      picks.push_back(idx);
  }
  for (std::size_t c = 0; c < k; ++c) centers.set_row(c, to_vec(points.row(picks[c])));

  std::vector<std::size_t> assign(points.rows, 0);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < points.rows; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = sq_dist(points.row(i), centers.row(c));
        if (dist < best) {
          best = dist;
          assign[i] = c;
        }
      }
    }
    Matrix next(k, d);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
      ++count[assign[i]];
      for (std::size_t j = 0; j < d; ++j) next(assign[i], j) += points(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        next.set_row(c, to_vec(centers.row(c)));  // keep empty clusters put
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) next(c, j) /= static_cast<double>(count[c]);
    }
    centers = std::move(next);
  }
  return centers;
}

MetricReport compute_metrics(const Matrix& samples, const Matrix& centers,
                             const Vec& taus, const KernelSpec& kernel,
                             const std::vector<std::size_t>& ks,
                             const Matrix* real) {
  MetricReport rep;
  rep.vendi = vendi_score(samples, kernel);
  rep.coverage = coverage_at(samples, centers, taus);
  rep.entropy_norm = normalized_entropy(samples, centers);
  if (real) {
    for (std::size_t k : ks)
      rep.pr.push_back(knn_precision_recall(samples, *real, k));
  }
  return rep;
}

}  // namespace oscar
