#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "oscar/endpoint.hpp"
#include "oscar/errors.hpp"
#include "oscar/flow.hpp"
#include "oscar/matrix.hpp"
#include "oscar/rng.hpp"
#include "oscar/sampler.hpp"
#include "test_support.hpp"

using namespace oscar;
using namespace oscar::testsupport;

namespace {

GmmSpec mirror_pair() {
  GmmSpec s;
  s.means = Matrix(2, 2);
  s.means(0, 0) = -3.0;
  s.means(1, 0) = 3.0;
  s.stds = {0.5, 0.5};
  s.weights = {0.5, 0.5};
  return s;
}

SamplerConfig small_config() {
  SamplerConfig cfg;
  cfg.particles = 8;
  cfg.steps = 20;
  cfg.seed = 3;
  cfg.beta.t0 = 0.05;  // keep some noise inside a gate
  cfg.beta.t1 = 0.35;
  cfg.beta.scale = 0.1;
  return cfg;
}

}  // namespace

TEST_CASE("partial projection removes the requested parallel fraction") {
  Vec g{2.0, 1.0};
  Vec v{1.0, 0.0};
  // Full projection kills the parallel part entirely (delta = 0).
  Vec p1 = project_partial(g, v, 1.0, 0.0);
  CHECK(p1[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p1[1] == 1.0);
  // Half projection leaves half of it.
  Vec ph = project_partial(g, v, 0.5, 0.0);
  CHECK(ph[0] == doctest::Approx(1.0).epsilon(1e-15));
  // lambda = 0 is the identity.
  CHECK(project_partial(g, v, 0.0, 0.0) == g);
  // The regularizer biases the removed fraction down, never up.
  Vec pd = project_partial(g, v, 1.0, 1e-2);
  CHECK(pd[0] > 0.0);
  CHECK(pd[0] < 0.05);
}

TEST_CASE("projection is equivariant under orthogonal maps") {
  // Reflecting both arguments through x -> -x_0 commutes with the projector.
  Vec g{1.3, -0.7, 0.2};
  Vec v{0.4, 2.0, -1.1};
  Vec base = project_partial(g, v, 0.95, 1e-8);
  Vec gm = g, vm = v;
  gm[0] = -gm[0];
  vm[0] = -vm[0];
  Vec refl = project_partial(gm, vm, 0.95, 1e-8);
  CHECK(refl[0] == doctest::Approx(-base[0]).epsilon(1e-15));
  CHECK(refl[1] == doctest::Approx(base[1]).epsilon(1e-15));
  CHECK(refl[2] == doctest::Approx(base[2]).epsilon(1e-15));
}

TEST_CASE("trust cap scales long gradients and leaves short ones alone") {
  Vec v{3.0, 4.0};  // |v| = 5
  Vec short_g{0.1, 0.0};
  CHECK(cap_trust(short_g, v, 0.3, 0.0) == short_g);
  Vec long_g{10.0, 0.0};
  Vec capped = cap_trust(long_g, v, 0.3, 0.0);
  CHECK(capped[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(capped[1] == 0.0);
  // Zero gradient stays zero even with eps guarding the division.
  Vec zero{0.0, 0.0};
  CHECK(cap_trust(zero, v, 0.3, 1e-8) == zero);
}

TEST_CASE("orthogonal noise is deterministic, scaled, and near-orthogonal") {
  Vec v{5.0, 3.0, 1.0, -2.0};
  Vec a = orth_noise(11, 4, 2, v, 1.0, 0.04, 1e-8, true);
  Vec b = orth_noise(11, 4, 2, v, 1.0, 0.04, 1e-8, true);
  CHECK(a == b);

  // beta_step = 0 produces the zero vector outright.
  Vec none = orth_noise(11, 4, 2, v, 1.0, 0.0, 1e-8, true);
  for (double x : none) CHECK(x == 0.0);

  // Scaling by sqrt(beta_step): quadrupling the budget doubles the vector.
  Vec big = orth_noise(11, 4, 2, v, 1.0, 0.16, 1e-8, true);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(big[j] == doctest::Approx(2.0 * a[j]).epsilon(1e-12));

  // Full projection leaves only the delta-induced residual.
  const double vn2 = dot(v, v);
  double worst = 0.0;
  for (std::uint64_t p = 0; p < 10000; ++p) {
    Vec eta = orth_noise(11, 9, p, v, 1.0, 0.01, 1e-8, true);
    const double resid =
        std::abs(dot(eta, v)) / (norm2(eta) * std::sqrt(vn2) + 1e-300);
    worst = std::max(worst, resid);
  }
  CHECK(worst <= 1e-6);

  // project = false keeps the raw scaled draw.
  Vec raw = orth_noise(11, 4, 2, v, 1.0, 0.04, 1e-8, false);
  Vec draw = rng::normal_vec(11, rng::kStepNoise, 4, 2, 4);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(raw[j] == doctest::Approx(0.2 * draw[j]).epsilon(1e-15));
}

TEST_CASE("uniform grid endpoints and spacing") {
  Vec g = uniform_time_grid(4);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(g[2] == doctest::Approx(0.5).epsilon(1e-15));

  Vec g0 = uniform_time_grid(0);
  REQUIRE(g0.size() == 1);
  CHECK(g0[0] == 0.0);
}

TEST_CASE("init draws: gaussian moments and disk containment") {
  SamplerConfig cfg;
  cfg.particles = 4000;
  cfg.seed = 21;
  Matrix g = draw_init(cfg, 3);
  REQUIRE(g.rows == 4000);
  REQUIRE(g.cols == 3);
  double mean = 0.0, var = 0.0;
  for (double x : g.data) mean += x;
  mean /= static_cast<double>(g.data.size());
  for (double x : g.data) var += (x - mean) * (x - mean);
  var /= static_cast<double>(g.data.size());
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.04);

  cfg.init = SamplerConfig::Init::disk;
  cfg.disk_radius = 1.5;
  Matrix d = draw_init(cfg, 2);
  double max_r = 0.0, mean_r2 = 0.0;
  for (std::size_t i = 0; i < d.rows; ++i) {
    const double r = norm2(d.row(i));
    max_r = std::max(max_r, r);
    mean_r2 += r * r;
  }
  mean_r2 /= static_cast<double>(d.rows);
  CHECK(max_r <= 1.5);
  // Uniform disk: E r^2 = R^2 / 2.
  CHECK(mean_r2 == doctest::Approx(1.125).epsilon(0.05));

  CHECK_THROWS_AS(draw_init(cfg, 3), SchemaError);
}

TEST_CASE("baseline run integrates the exact linear decay") {
  // v = -x: baseline Heun over T steps multiplies by (1 - h + h^2/2)^T.
  DecayField field(2);
  SamplerConfig cfg;
  cfg.particles = 4;
  cfg.steps = 100;
  cfg.seed = 2;
  cfg.encoder.in_dim = 2;
  RunTrace tr = run(cfg, field, Method::baseline);
  REQUIRE(tr.records.size() == 101);
  const double h = 0.01;
  const double factor = std::pow(1.0 - h + 0.5 * h * h, 100.0);
  Matrix init = draw_init(cfg, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(tr.final_states(i, j) ==
            doctest::Approx(init(i, j) * factor).epsilon(1e-12));
  // Exact exponential decay is approximated to O(h^2): sanity-check scale.
  CHECK(factor == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("controlled run with zero control and zero noise is bitwise baseline") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  cfg.gamma.gamma0 = 0.0;
  cfg.beta.scale = 0.0;
  RunTrace a = run(cfg, field, Method::oscar);
  RunTrace b = run(cfg, field, Method::baseline);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t s = 0; s < a.records.size(); ++s)
    CHECK(a.records[s].state_checksum == b.records[s].state_checksum);
  CHECK(a.final_states.data == b.final_states.data);
}

TEST_CASE("runs are reproducible bit for bit") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  RunTrace a = run(cfg, field, Method::oscar);
  RunTrace b = run(cfg, field, Method::oscar);
  for (std::size_t s = 0; s < a.records.size(); ++s)
    CHECK(a.records[s].state_checksum == b.records[s].state_checksum);
  CHECK(a.final_states.data == b.final_states.data);
  CHECK(a.method == "oscar");
  CHECK(a.dim == 2);
  CHECK(a.particles == 8);
}

TEST_CASE("mirror-symmetric problem stays mirror symmetric under control") {
  // Identity encoder and zero noise keep the whole pipeline equivariant
  // under x -> (-x0, x1); a mirrored population must evolve mirrored.
  GmmField field(mirror_pair());
  SamplerConfig cfg;
  cfg.particles = 6;
  cfg.steps = 10;
  cfg.lambda = 1.0;
  cfg.gamma.gamma0 = 0.3;
  cfg.beta.scale = 0.0;
  cfg.encoder.kind = EncoderSpec::Kind::identity;
  cfg.encoder.in_dim = 2;

  Matrix init(6, 2);
  for (std::size_t i = 0; i < 6; ++i)
    init.set_row(i, rng::normal_vec(77, rng::kMisc, 30, i, 2));
  Matrix mirrored(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    mirrored(i, 0) = -init(i, 0);
    mirrored(i, 1) = init(i, 1);
  }
  RunTrace a = run(cfg, field, Method::oscar, init);
  RunTrace m = run(cfg, field, Method::oscar, mirrored);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(m.final_states(i, 0) ==
          doctest::Approx(-a.final_states(i, 0)).epsilon(1e-10));
    CHECK(m.final_states(i, 1) ==
          doctest::Approx(a.final_states(i, 1)).epsilon(1e-10));
  }
}

TEST_CASE("single-particle step reproduces the hand-written update chain") {
  // m = 1, identity encoder, frozen defaults: every stage of the controlled
  // step has a closed form that can be replicated line by line.
  DecayField field(2);
  SamplerConfig cfg;
  cfg.particles = 1;
  cfg.steps = 10;
  cfg.lambda = 1.0;
  cfg.noise_lambda = 1.0;
  cfg.gamma = {GammaSchedule::Shape::cos2, 0.2, 0.0, 1.0};
  cfg.beta.scale = 0.0;
  cfg.encoder.kind = EncoderSpec::Kind::identity;
  cfg.encoder.in_dim = 2;

  ParticleSet ps;
  ps.states = Matrix(1, 2);
  ps.states(0, 0) = 1.0;
  ps.states(0, 1) = 2.0;
  ps.t = 0.4;
  ps.seed = cfg.seed;
  Encoder enc = make_encoder(cfg.encoder);
  StepRecord rec = oscar_step(ps, field, enc, cfg, 4, 0.5);

  // Replicate: endpoint features z = psi-hat(x, 0.4) for v = -x is
  // (1 - dt + dt^2/2) x with dt = 0.6.
  const double shrink = 1.0 - 0.6 + 0.18;
  Vec x{1.0, 2.0};
  Vec z{shrink * x[0], shrink * x[1]};
  // Frozen energy gradient for m = 1: -tau z / (1 + tau |z|^2 + eps_tr).
  const double zn2 = dot(z, z);
  const double eps_tr = cfg.energy.eps * zn2;
  Vec gz{-z[0] / (1.0 + zn2 + eps_tr), -z[1] / (1.0 + zn2 + eps_tr)};
  // Pull back through the endpoint map (exact mode, J = -I):
  // u + dt/2 J2 u + J1 (dt/2 u + dt^2/2 J2 u) with J1 = J2 = -1.
  const double pull = 1.0 - 0.3 - (0.3 - 0.18);
  Vec g{pull * gz[0], pull * gz[1]};
  // Project fully against v = -x, then cap.
  Vec v{-1.0, -2.0};
  Vec proj = project_partial(g, v, 1.0, cfg.delta);
  Vec ctrl = cap_trust(proj, v, cfg.trust_ratio, cfg.delta);
  // Heun with both stages damped by the stage gammas.
  const double gl = gamma_at(cfg.gamma, 0.4), gr = gamma_at(cfg.gamma, 0.5);
  Vec xp(2), vp(2), xn(2);
  for (std::size_t j = 0; j < 2; ++j) xp[j] = x[j] + 0.1 * (v[j] - gl * ctrl[j]);
  for (std::size_t j = 0; j < 2; ++j) vp[j] = -xp[j];
  for (std::size_t j = 0; j < 2; ++j)
    xn[j] = x[j] + 0.05 * ((v[j] - gl * ctrl[j]) + (vp[j] - gr * ctrl[j]));

  CHECK(ps.states(0, 0) == doctest::Approx(xn[0]).epsilon(1e-14));
  CHECK(ps.states(0, 1) == doctest::Approx(xn[1]).epsilon(1e-14));
  CHECK(ps.t == 0.5);
  CHECK(rec.step == 4);
  CHECK(rec.t == 0.4);
  CHECK(rec.skipped == 0);
  // Here the raw gradient is exactly parallel to v (z, g and v are all
  // multiples of x), so the full projection annihilates it: the applied
  // control is a delta-sized remnant with no practical effect. The
  // *normalized* residual of that remnant is meaningless (a parallel vector
  // stays parallel), so assert the magnitude instead.
  CHECK(norm2(ctrl) <= 1e-8);
  CHECK(rec.max_control_frac <= 1e-7);
}

TEST_CASE("trust region bounds the control fraction of every step") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  cfg.gamma.gamma0 = 0.4;  // strong control
  RunTrace tr = run(cfg, field, Method::oscar);
  double gmax = 0.0;
  for (int i = 0; i <= 100; ++i)
    gmax = std::max(gmax, gamma_at(cfg.gamma, 0.01 * i));
  for (const StepRecord& r : tr.records)
    CHECK(r.max_control_frac <= cfg.trust_ratio * gmax + 1e-9);
}

TEST_CASE("zero-step run emits exactly the initial node") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  cfg.steps = 0;
  RunTrace tr = run(cfg, field, Method::oscar);
  REQUIRE(tr.records.size() == 1);
  CHECK(tr.records[0].t == 0.0);
  CHECK(tr.final_states.rows == cfg.particles);
}

TEST_CASE("snapshots are taken at the stride and always at the end") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  cfg.snapshot_stride = 8;
  RunTrace tr = run(cfg, field, Method::oscar);
  REQUIRE(!tr.snapshot_steps.empty());
  CHECK(tr.snapshot_steps.front() == 0);
  CHECK(tr.snapshot_steps.back() == 20);
  CHECK(tr.snapshots.size() == tr.snapshot_steps.size());
  for (const Matrix& s : tr.snapshots) {
    CHECK(s.rows == cfg.particles);
    CHECK(s.cols == 2);
  }
}

TEST_CASE("dimension mismatches are rejected up front") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  cfg.encoder.in_dim = 3;  // field is 2-d
  CHECK_THROWS_AS(run(cfg, field, Method::oscar), DimensionMismatch);

  cfg = small_config();
  Matrix bad_init(cfg.particles, 3);
  CHECK_THROWS_AS(run(cfg, field, Method::oscar, bad_init), DimensionMismatch);
  Matrix bad_rows(cfg.particles + 1, 2);
  CHECK_THROWS_AS(run(cfg, field, Method::oscar, bad_rows), DimensionMismatch);
}

TEST_CASE("exploding states raise a non-finite error") {
  // v = +50 x doubles fast enough to overflow well before 60 steps.
  class BlowupField : public VelocityField {
   public:
    std::size_t dim() const override { return 2; }
    Vec value(std::span<const double> x, double) const override {
      Vec v(2);
      for (std::size_t j = 0; j < 2; ++j) v[j] = 50.0 * x[j] * x[j] * x[j];
      return v;
    }
    Vec vjp(std::span<const double> x, double,
            std::span<const double> cot) const override {
      Vec g(2);
      for (std::size_t j = 0; j < 2; ++j) g[j] = 150.0 * x[j] * x[j] * cot[j];
      return g;
    }
  };
  BlowupField field;
  SamplerConfig cfg = small_config();
  cfg.steps = 200;
  CHECK_THROWS_AS(run(cfg, field, Method::baseline), NonFinite);
}

TEST_CASE("per-record diagnostics stay internally consistent") {
  GmmField field(mirror_pair());
  SamplerConfig cfg = small_config();
  RunTrace tr = run(cfg, field, Method::oscar);
  for (const StepRecord& r : tr.records) {
    REQUIRE(r.alignment.size() == cfg.particles);
    double mx = 0.0;
    for (std::size_t i = 0; i < cfg.particles; ++i)
      mx = std::max(mx, r.orth_residual[i]);
    CHECK(r.max_orth_residual == doctest::Approx(mx).epsilon(1e-15));
    double mean = 0.0;
    for (double a : r.alignment) mean += a;
    mean /= static_cast<double>(cfg.particles);
    CHECK(r.mean_alignment == doctest::Approx(mean).epsilon(1e-12));
    CHECK(std::abs(r.energy + r.log_volume) <= 1e-10);
  }
  // The final node carries diagnostics but no outgoing control.
  const StepRecord& last = tr.records.back();
  CHECK(last.max_control_frac == 0.0);
  CHECK(last.max_orth_residual == 0.0);
}
