#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sbs/optimizer.hpp"

using namespace sbs;

namespace {

std::vector<std::pair<int, int>> bond_pairs(const Lattice& lat) {
  std::vector<std::pair<int, int>> out;
  for (const auto& b : lat.bonds()) out.emplace_back(b.a, b.b);
  return out;
}

/// Central differences of the Rayleigh quotient of an independently built
/// matrix, over interleaved real coordinates.
std::vector<double> oracle_fd(const StringBondState& st, const oracle::Mat& h, double eps = 1e-5) {
  StringBondState probe = st;
  auto params = probe.params();
  std::vector<double> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const cplx orig = params[i];
    for (const cplx dir : {cplx(1.0, 0.0), cplx(0.0, 1.0)}) {
      params[i] = orig + eps * dir;
      const double up = oracle::rayleigh(h, oracle::dense(probe));
      params[i] = orig - eps * dir;
      const double down = oracle::rayleigh(h, oracle::dense(probe));
      params[i] = orig;
      out.push_back((up - down) / (2.0 * eps));
    }
  }
  return out;
}

double exact_energy(const StringBondState& st, const LocalHamiltonian& h) {
  return enumerate_estimates(st, h).energy.real();
}

double param_distance(const StringBondState& a, const StringBondState& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.num_params(); ++i) s += std::norm(a.params()[i] - b.params()[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(Gradient, MatchesIndependentFiniteDifferences) {
  const Lattice lat(2, 3, Boundary::open);
  const auto bonds = bond_pairs(lat);
  const auto tfi = oracle::tfi_matrix(6, bonds, 1.0, 1.3);
  const auto signs = default_frustration(lat);
  std::vector<double> js;
  for (std::size_t i = 0; i < bonds.size(); ++i) js.push_back(signs[i]);
  const auto fxx = oracle::xx_matrix(6, bonds, js, 0.5);
  for (std::uint64_t seed : {1, 2}) {
    const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, seed, 0.5);
    for (int model = 0; model < 2; ++model) {
      const auto h = model == 0 ? build_tfi(lat, 1.0, 1.3) : build_frustrated_xx(lat, 1.0, 0.5);
      const auto g = enumerated_gradient(st, h).real_coordinates();
      const auto fd = oracle_fd(st, model == 0 ? tfi : fxx);
      ASSERT_EQ(g.size(), fd.size());
      double top = 0.0;
      for (double v : fd) top = std::max(top, std::abs(v));
      for (std::size_t i = 0; i < g.size(); ++i)
        EXPECT_LE(std::abs(g[i] - fd[i]), 1e-6 * std::max(std::abs(fd[i]), 1e-3 * top)) << "coordinate " << i;
    }
  }
}

TEST(Gradient, VanishesForConstantHamiltonian) {
  const Lattice lat(2, 3, Boundary::open);
  std::vector<LocalTerm> terms;
  for (int x = 0; x < 6; ++x) terms.push_back({{x}, {Branch{{0}, {cplx(0.7), cplx(0.7)}}}});
  const LocalHamiltonian h(lat, terms);
  const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 3, 0.5);
  EXPECT_LT(enumerated_gradient(st, h).norm(), 1e-12);
  SamplerConfig cfg;
  cfg.samples = 300;
  cfg.seed = 1;
  SampleRequest req;
  req.gradient = true;
  EXPECT_LT(sampled_gradient(st, sample(st, h, cfg, req)).norm(), 1e-12);
}

TEST(Gradient, ScalesInverselyWithTensorScale) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 2.0);
  const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 5, 0.5);
  auto scaled = st;
  const TensorId id{1, 0};
  for (auto& z : scaled.tensor(id.string, id.position)) z *= 2.0;
  const auto g0 = enumerated_gradient(st, h);
  const auto g1 = enumerated_gradient(scaled, h);
  const std::size_t off = st.tensor_offset(id.string, id.position);
  for (int i = 0; i < st.tensor_size(id.string, id.position); ++i)
    EXPECT_LT(std::abs(g1.grad[off + static_cast<std::size_t>(i)] - 0.5 * g0.grad[off + static_cast<std::size_t>(i)]),
              1e-12 * (1.0 + std::abs(g0.grad[off + static_cast<std::size_t>(i)])));
}

TEST(Gradient, ProductStateIsStationaryWithoutField) {
  const Lattice lat(3, 3, Boundary::open);
  StringBondState st(lat, lines_pattern(lat), 1, true);
  for (const auto& id : st.tensors()) st.matrix(id.string, id.position, 0)[0] = 1.0;
  EXPECT_LT(enumerated_gradient(st, build_tfi(lat, 1.0, 0.0)).norm(), 1e-12);
}

TEST(Gradient, SampledEstimateAlignsWithExact) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.0);
  const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 9, 0.5);
  const auto exact = enumerated_gradient(st, h);
  SamplerConfig cfg;
  cfg.samples = 20000;
  cfg.seed = 11;
  SampleRequest req;
  req.gradient = true;
  const auto est = sampled_gradient(st, sample(st, h, cfg, req));
  cplx dot = 0.0;
  for (std::size_t i = 0; i < exact.grad.size(); ++i) dot += std::conj(exact.grad[i]) * est.grad[i];
  EXPECT_GT(dot.real() / (exact.norm() * est.norm()), 0.9);
}

TEST(Gradient, RescalingKeepsPerTensorDirection) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.2);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 14, 0.5);
  for (auto& z : st.params()) z *= 3.0;
  const auto before = enumerated_gradient(st, h);
  st.rescale_strings();
  const auto after = enumerated_gradient(st, h);
  for (const auto& id : st.tensors()) {
    const std::size_t off = st.tensor_offset(id.string, id.position);
    cplx dot = 0.0;
    double na = 0.0, nb = 0.0;
    for (int i = 0; i < st.tensor_size(id.string, id.position); ++i) {
      const cplx a = before.grad[off + static_cast<std::size_t>(i)], b = after.grad[off + static_cast<std::size_t>(i)];
      dot += std::conj(a) * b;
      na += std::norm(a);
      nb += std::norm(b);
    }
    EXPECT_NEAR(dot.real() / std::sqrt(na * nb), 1.0, 1e-10);
  }
}

// ---- steps ---------------------------------------------------------------

TEST(Step, SmallStepLowersEnergy) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.5);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, seed, 0.5);
    const double before = exact_energy(st, h);
    ASSERT_TRUE(step(st, enumerated_gradient(st, h), 1e-3).accepted);
    EXPECT_LT(exact_energy(st, h), before) << "seed " << seed;
  }
}

TEST(Step, ZeroStepLeavesStateUnchanged) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.5);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 2, 0.5);
  const auto before = st;
  step(st, enumerated_gradient(st, h), 0.0, StepNormalization::none, false);
  EXPECT_EQ(param_distance(st, before), 0.0);
}

TEST(Step, NormalizedDisplacementEqualsEta) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.5);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 2, 0.5);
  const auto before = st;
  const auto r = step(st, enumerated_gradient(st, h), 0.02, StepNormalization::global, false);
  EXPECT_NEAR(r.displacement, 0.02, 1e-14);
  EXPECT_NEAR(param_distance(st, before), 0.02, 1e-14);
}

TEST(Step, PerTensorNormalizationMovesEachTensorByEta) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.5);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 2, 0.5);
  const auto before = st;
  step(st, enumerated_gradient(st, h), 0.01, StepNormalization::per_tensor, false);
  for (const auto& id : st.tensors()) {
    double s = 0.0;
    for (int i = 0; i < st.tensor_size(id.string, id.position); ++i)
      s += std::norm(st.tensor(id.string, id.position)[static_cast<std::size_t>(i)] -
                     before.tensor(id.string, id.position)[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(std::sqrt(s), 0.01, 1e-14);
  }
}

TEST(Step, TwoHalfStepsDifferAtSecondOrder) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.5);
  const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 4, 0.5);
  auto gap = [&](double eta) {
    auto full = st, half = st;
    step(full, enumerated_gradient(full, h), eta, StepNormalization::none, false);
    step(half, enumerated_gradient(half, h), eta / 2, StepNormalization::none, false);
    step(half, enumerated_gradient(half, h), eta / 2, StepNormalization::none, false);
    return std::pair{param_distance(full, half), std::abs(exact_energy(full, h) - exact_energy(half, h))};
  };
  const auto a = gap(1e-2), b = gap(5e-3);
  EXPECT_NEAR(a.first / b.first, 4.0, 0.4);
  EXPECT_NEAR(a.second / b.second, 4.0, 0.6);
}

TEST(Step, NonFiniteUpdateIsRejected) {
  const Lattice lat(2, 2, Boundary::open);
  auto st = random_state(lat, named_pattern(lat, "lines"), 2, 1, 0.5);
  GradientEstimate g;
  g.grad.assign(st.num_params(), cplx(std::numeric_limits<double>::infinity(), 0.0));
  const auto before = st;
  EXPECT_FALSE(step(st, g, 0.1, StepNormalization::none).accepted);
  EXPECT_EQ(param_distance(st, before), 0.0);
}

// ---- bond-dimension growth and local eigensolve -------------------------

TEST(Growth, ZeroNoisePreservesAmplitudes) {
  const Lattice lat(3, 3, Boundary::periodic);
  const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 6, 0.5);
  const auto grown = grow_bond_dimension(st, 4, 0.0, 1);
  EXPECT_EQ(grown.bond_dim(), 4);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    Configuration n(9);
    for (auto& v : n) v = static_cast<int>(rng() & 1);
    EXPECT_LT(std::abs(oracle::amplitude(grown, n) / oracle::amplitude(st, n) - 1.0), 1e-12);
  }
}

TEST(Growth, SmallNoiseKeepsEnergyClose) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.0);
  const auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 6, 0.5);
  const double e0 = exact_energy(st, h);
  const double e1 = exact_energy(grow_bond_dimension(st, 3, 1e-3, 2), h);
  EXPECT_LT(std::abs(e1 - e0) / std::abs(e0), 1e-3);
}

TEST(Growth, RejectsShrinking) {
  const Lattice lat(2, 2, Boundary::open);
  const auto st = random_state(lat, named_pattern(lat, "lines"), 2, 1);
  EXPECT_THROW(grow_bond_dimension(st, 2, 0.0, 1), InputError);
}

TEST(LocalEigensolve, DoesNotRaiseEnergy) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 2.0);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 7, 0.5);
  for (const TensorId id : {TensorId{0, 1}, TensorId{3, 0}, TensorId{5, 2}}) {
    const double before = exact_energy(st, h);
    const auto q = enumerate_xy(st, h, id);
    double lambda = 0.0;
    const auto v = local_eigensolve_update(q, st.tensor(id.string, id.position), &lambda);
    std::copy(v.data(), v.data() + v.size(), st.tensor(id.string, id.position).begin());
    const double after = exact_energy(st, h);
    EXPECT_LE(after, before + 1e-10);
    EXPECT_NEAR(after, lambda, 1e-6);
  }
}

TEST(LocalEigensolve, StationaryAtLocalOptimum) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 2.0);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 7, 0.5);
  const TensorId id{1, 1};
  auto set = [&](const Eigen::VectorXcd& v) {
    std::copy(v.data(), v.data() + v.size(), st.tensor(id.string, id.position).begin());
  };
  set(local_eigensolve_update(enumerate_xy(st, h, id), st.tensor(id.string, id.position)));
  const auto a0 = st.tensor(id.string, id.position);
  const Eigen::VectorXcd v0 = Eigen::Map<const Eigen::VectorXcd>(a0.data(), static_cast<Eigen::Index>(a0.size()));
  double lambda = 0.0;
  const auto v1 = local_eigensolve_update(enumerate_xy(st, h, id), a0, &lambda);
  EXPECT_NEAR(std::abs(v0.dot(v1)) / (v0.norm() * v1.norm()), 1.0, 1e-8);
  // the eigenvalue carries the 1e-8 trace regularization of Y
  EXPECT_NEAR(lambda, exact_energy(st, h), 1e-6);
}

TEST(LocalEigensolve, SampledFormsAreFragile) {
  // with M = 500 the sampled update often raises the true energy
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 2.0);
  int worse = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 40 + seed, 0.5);
    const TensorId id{6, 2};
    for (int sweep = 0; sweep < 3; ++sweep)
      for (const auto& t : st.tensors()) {
        const auto v = local_eigensolve_update(enumerate_xy(st, h, t), st.tensor(t.string, t.position));
        std::copy(v.data(), v.data() + v.size(), st.tensor(t.string, t.position).begin());
        st.rescale_strings();
      }
    const double before = exact_energy(st, h);
    SamplerConfig cfg;
    cfg.samples = 500;
    cfg.seed = seed;
    SampleRequest req;
    req.tracked = {id};
    const auto q = estimate_xy(sample(st, h, cfg, req), 0);
    try {
      const auto v = local_eigensolve_update(q, st.tensor(id.string, id.position));
      std::copy(v.data(), v.data() + v.size(), st.tensor(id.string, id.position).begin());
      worse += exact_energy(st, h) > before ? 1 : 0;
    } catch (const std::runtime_error&) {
      ++worse;
    }
  }
  EXPECT_GE(worse, 5);
}

TEST(Descent, ExactGradientWithBacktrackingIsMonotone) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_frustrated_xx(lat, 1.0, 0.5);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 3, 0.5);
  double e = exact_energy(st, h);
  for (int it = 0; it < 40; ++it) {
    const auto g = enumerated_gradient(st, h);
    double eta = 0.1;
    for (;;) {
      auto trial = st;
      step(trial, g, eta);
      const double et = exact_energy(trial, h);
      if (et <= e || eta < 1e-8) {
        if (et <= e) {
          st = trial;
          EXPECT_LE(et, e);
          e = et;
        }
        break;
      }
      eta *= 0.5;
    }
  }
  EXPECT_LT(e, exact_energy(random_state(lat, named_pattern(lat, "lines+loops"), 2, 3, 0.5), h));
}

TEST(Descent, NoisyGradientStillDescends) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 2.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 60 + seed, 0.5);
    const double before = exact_energy(st, h);
    OptimizerConfig cfg;
    cfg.samples = 2000;
    cfg.max_iterations = 30;
    cfg.seed = seed;
    optimize(st, h, cfg, SamplerConfig{});
    EXPECT_LT(exact_energy(st, h), before) << "seed " << seed;
  }
}

TEST(Descent, LargerBondDimensionDoesNotLoseGround) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.0);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 5, 0.3);
  OptimizerConfig cfg;
  cfg.samples = 1000;
  cfg.max_iterations = 150;
  cfg.seed = 3;
  optimize(st, h, cfg, SamplerConfig{});
  const double e2 = exact_energy(st, h);
  auto big = grow_bond_dimension(st, 4, 1e-3, 7);
  cfg.eta = 0.02;
  cfg.samples = 4000;
  cfg.max_iterations = 100;
  cfg.seed = 4;
  optimize(big, h, cfg, SamplerConfig{});
  EXPECT_LE(exact_energy(big, h), e2 + 1e-3 * std::abs(e2));
}

// ---- full loop -----------------------------------------------------------

TEST(Optimize, ReachesTwoByTwoGroundState) {
  const Lattice lat(2, 2, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.0);
  auto st = random_state(lat, named_pattern(lat, "lines+loops"), 2, 3, 0.3);
  OptimizerConfig cfg;
  cfg.eta = 0.05;
  cfg.samples = 1000;
  cfg.max_iterations = 300;
  cfg.seed = 5;
  SamplerConfig sc;
  const auto res = optimize(st, h, cfg, sc);
  const double exact = oracle::lowest_eigenvalue(oracle::tfi_matrix(4, bond_pairs(lat), 1.0, 1.0));
  EXPECT_LT(std::abs(exact_energy(st, h) - exact) / std::abs(exact), 0.01);
  EXPECT_FALSE(res.trajectory.empty());
}

TEST(Optimize, ScheduledGrowthRaisesBondDimension) {
  const Lattice lat(2, 2, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.0);
  auto st = random_state(lat, named_pattern(lat, "lines"), 2, 3, 0.3);
  OptimizerConfig cfg;
  cfg.samples = 200;
  cfg.samples_cap = 400;
  cfg.max_iterations = 6;
  cfg.bond_schedule = {{3, 3}};
  cfg.seed = 2;
  const auto res = optimize(st, h, cfg, SamplerConfig{});
  ASSERT_EQ(res.trajectory.size(), 6u);
  EXPECT_EQ(res.trajectory[2].bond_dim, 2);
  EXPECT_EQ(res.trajectory[3].bond_dim, 3);
  EXPECT_EQ(res.trajectory[3].samples, 400u);
  EXPECT_EQ(st.bond_dim(), 3);
}

TEST(Optimize, RepeatedRunsAreIdentical) {
  const Lattice lat(2, 3, Boundary::open);
  const auto h = build_tfi(lat, 1.0, 1.0);
  const auto st0 = random_state(lat, named_pattern(lat, "lines+loops"), 2, 3, 0.3);
  OptimizerConfig cfg;
  cfg.samples = 300;
  cfg.max_iterations = 15;
  cfg.seed = 9;
  auto a = st0, b = st0;
  const auto ra = optimize(a, h, cfg, SamplerConfig{});
  const auto rb = optimize(b, h, cfg, SamplerConfig{});
  for (std::size_t i = 0; i < ra.trajectory.size(); ++i) EXPECT_EQ(ra.trajectory[i].energy, rb.trajectory[i].energy);
  EXPECT_EQ(param_distance(a, b), 0.0);
}
