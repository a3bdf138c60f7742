#pragma once

#include <limits>
#include <map>

#include "oscar/matrix.hpp"

namespace oscar {

// Similarity kernel for the spectral diversity score.
struct KernelSpec {
  enum class Kind { linear, rbf };
  Kind kind = Kind::rbf;
  // Bandwidth for rbf: exp(-|a-b|^2 / (2 h^2)). NaN means "use the median
  // pairwise distance of the point set" (the value actually used is written
  // into the metric report).
  double bandwidth = std::numeric_limits<double>::quiet_NaN();
};

// Effective number of distinct rows: exp of the von Neumann entropy of the
// trace-normalized kernel matrix. 1 for m duplicates, m for orthonormal
// rows under the linear kernel; always in [1, m].
struct VendiResult {
  double score = 1.0;
  double bandwidth_used = 0.0;  // 0 for the linear kernel
};
VendiResult vendi_score(const Matrix& points, const KernelSpec& kernel);

// Fraction of reference centers with at least one sample within tau, for
// each tau in the list.
std::map<double, double> coverage_at(const Matrix& samples, const Matrix& centers,
                                     const Vec& taus);

// Entropy of the nearest-center histogram normalized by log(#centers);
// distance ties go to the lowest center index. 1 = perfectly balanced.
double normalized_entropy(const Matrix& samples, const Matrix& centers);

// Manifold precision/recall from k-NN radii: a generated point is precise if
// it lies within the k-NN radius of some real point; recall is the mirror
// statement. Radii exclude the point itself. Throws TooFewPoints when a
// cloud has fewer than k+1 points.
struct PrecisionRecall {
  std::size_t k = 3;
  double precision = 0.0;
  double recall = 0.0;
};
PrecisionRecall knn_precision_recall(const Matrix& generated, const Matrix& real,
                                     std::size_t k = 3);

// Lloyd's algorithm with deterministic seeding, for reference clouds that
// come without labeled centers. Returns k centers (rows).
Matrix kmeans_centers(const Matrix& points, std::size_t k, std::uint64_t seed,
                      std::size_t iters = 50);

// Everything the CLI reports for one sample set.
struct MetricReport {
  VendiResult vendi;
  std::map<double, double> coverage;
  double entropy_norm = 0.0;
  std::vector<PrecisionRecall> pr;  // one entry per requested k
};

MetricReport compute_metrics(const Matrix& samples, const Matrix& centers,
                             const Vec& taus, const KernelSpec& kernel,
                             const std::vector<std::size_t>& ks,
                             const Matrix* real = nullptr);

}  // namespace oscar
