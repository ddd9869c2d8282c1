#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sadmm/oracle.hpp"
#include "sadmm/presets.hpp"

using namespace sadmm;

namespace {

std::vector<SumComponent> four_least_squares() {
  std::vector<SumComponent> c;
  const double rows[4][2] = {{1, 0}, {0, 2}, {1, -1}, {3, 0.5}};
  const double t[4] = {1, -1, 0.5, 2};
  for (int i = 0; i < 4; ++i) {
    Vector a(2);
    a << rows[i][0], rows[i][1];
    c.push_back(LeastSquaresTerm{a, t[i]});
  }
  return c;
}

Vector random_vector(std::mt19937_64& gen, Index d, double scale = 1.0) {
  std::normal_distribution<double> n01;
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = scale * n01(gen);
  return v;
}

}  // namespace

TEST_CASE("zero-noise additive oracle returns the exact gradient") {
  Matrix H(2, 2);
  H << 2, 0.5, 0.5, 1;
  const Vector lin = Vector::Constant(2, -1.0);
  auto model = oracles::exact_quadratic(H, lin);
  StochasticOracle oracle(model, 9, 0);
  Vector x(2);
  x << 0.3, -0.7;
  const NoiseSample s = oracle.sample_subgradient(x);
  REQUIRE(s.delta);
  CHECK(s.delta->isZero(0.0));
  CHECK(s.g == H * x + lin);
}

TEST_CASE("single-component finite sum is noise free") {
  Vector a(3);
  a << 1, -2, 0.5;
  auto model = std::make_shared<FiniteSumModel>(std::vector<SumComponent>{LeastSquaresTerm{a, 0.7}});
  StochasticOracle oracle(model, 1, 1);
  Vector x(3);
  x << 0.1, 0.2, 0.3;
  for (int i = 0; i < 5; ++i) {
    const NoiseSample s = oracle.sample_subgradient(x);
    const double r = a.dot(x) - 0.7;
    CHECK((s.g - r * a).norm() <= 1e-15);
    REQUIRE(s.delta);
    CHECK(s.delta->norm() <= 1e-15);
  }
}

TEST_CASE("finite-sum gradient is the component average") {
  auto comps = four_least_squares();
  const FiniteSumModel model(comps);
  Vector x(2);
  x << 0.4, -1.2;
  std::vector<double> avg(2, 0.0);
  for (const auto& c : comps) {
    const auto& t = std::get<LeastSquaresTerm>(c);
    const double r = t.a[0] * x[0] + t.a[1] * x[1] - t.target;
    avg[0] += r * t.a[0] / 4;
    avg[1] += r * t.a[1] / 4;
  }
  const Vector g = model.subgradient(x);
  CHECK(g[0] == doctest::Approx(avg[0]).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(avg[1]).epsilon(1e-14));

  // Mixed terms with a ridge, at random points.
  std::mt19937_64 gen(21);
  std::vector<SumComponent> mixed;
  for (int i = 0; i < 30; ++i) {
    if (i % 2) mixed.push_back(LeastSquaresTerm{random_vector(gen, 5), 0.1 * i});
    else mixed.push_back(HingeTerm{random_vector(gen, 5), i % 4 ? 1.0 : -1.0});
  }
  const FiniteSumModel m2(mixed, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector z = random_vector(gen, 5);
    Vector sum = Vector::Zero(5);
    for (std::size_t i = 0; i < m2.size(); ++i) sum += m2.component(i, z).subgradient;
    sum /= static_cast<double>(m2.size());
    const Vector exact = m2.subgradient(z);
    CHECK((exact - sum).norm() <= 1e-12 * std::max(1.0, exact.norm()));
  }
}

TEST_CASE("equal seed and stream replay the same draws") {
  PresetParams p;
  const Preset preset = make_preset(p);
  StochasticOracle a(preset.spec->theta1_ptr(), 77, 3), b(preset.spec->theta1_ptr(), 77, 3),
      c(preset.spec->theta1_ptr(), 77, 4);
  const Vector x = Vector::Constant(p.dim, 0.1);
  bool any_diff = false;
  for (int i = 0; i < 200; ++i) {
    const NoiseSample sa = a.sample_subgradient(x);
    const NoiseSample sb = b.sample_subgradient(x);
    const NoiseSample sc = c.sample_subgradient(x);
    CHECK(sa.g == sb.g);
    CHECK(sa.value == sb.value);
    any_diff = any_diff || !(sa.g == sc.g);
  }
  CHECK(any_diff);
  CHECK(a.calls() == 200);
}

TEST_CASE("noise is unbiased") {
  const Index d = 4;
  const std::size_t N = 100000;
  std::mt19937_64 gen(8);
  auto base = std::make_shared<QuadraticObjective>(QuadraticForm{Matrix::Identity(d, d), Vector::Zero(d), 0.0});
  struct Case {
    std::shared_ptr<const StochasticModel> model;
    double sigma;
  };
  auto comps = four_least_squares();
  std::vector<Case> cases{
      {std::make_shared<AdditiveNoiseModel>(base, NoiseKind::gaussian, 1.5), 1.5},
      {std::make_shared<AdditiveNoiseModel>(base, NoiseKind::uniform, 0.8), 0.8},
  };
  for (const auto& cs : cases) {
    StochasticOracle oracle(cs.model, 5, 0);
    for (int p = 0; p < 10; ++p) {
      const Vector x = random_vector(gen, d);
      Vector mean = Vector::Zero(d);
      for (std::size_t i = 0; i < N; ++i) mean += *oracle.sample_subgradient(x).delta;
      mean /= static_cast<double>(N);
      CHECK(mean.norm() <= 5.0 * cs.sigma / std::sqrt(double(N)) * std::sqrt(double(d)));
    }
  }
  // Finite sum: sigma from the empirical spread at the point.
  auto fs = std::make_shared<FiniteSumModel>(comps);
  StochasticOracle oracle(fs, 5, 1);
  for (int p = 0; p < 10; ++p) {
    const Vector x = random_vector(gen, 2);
    const Vector exact = fs->subgradient(x);
    double var = 0.0;
    for (std::size_t i = 0; i < fs->size(); ++i) var += (fs->component(i, x).subgradient - exact).squaredNorm() / 4.0;
    Vector mean = Vector::Zero(2);
    for (std::size_t i = 0; i < N; ++i) mean += *oracle.sample_subgradient(x).delta;
    mean /= static_cast<double>(N);
    CHECK(mean.norm() <= 5.0 * std::sqrt(var) / std::sqrt(double(N)) * std::sqrt(2.0));
  }
}

TEST_CASE("assumption validator") {
  const Index d = 4;
  auto base = std::make_shared<QuadraticObjective>(QuadraticForm{Matrix::Identity(d, d), Vector::Zero(d), 0.0});
  ProblemConstants c;
  c.M = 10.0;

  SUBCASE("zero noise") {
    AdditiveNoiseModel model(base, NoiseKind::none, 0.0);
    const AssumptionReport r = validate_assumptions(model, Ball{1.0}, c, 1000, 3);
    CHECK(r.variance.mean == 0.0);
    CHECK(r.variance.radius == 0.0);
    CHECK_FALSE(r.sigma_violated);
  }
  SUBCASE("gaussian variance recovered") {
    AdditiveNoiseModel model(base, NoiseKind::gaussian, 1.0);
    c.sigma = 1.0;
    c.M = std::sqrt(1.0 + 1.0);
    const AssumptionReport r = validate_assumptions(model, Ball{1.0}, c, 100000, 4);
    CHECK(r.variance.mean >= 0.97);
    CHECK(r.variance.mean <= 1.03);
    CHECK_FALSE(r.sigma_violated);
    CHECK_FALSE(r.M_violated);
  }
  SUBCASE("pointwise bound caps the second moment") {
    PresetParams p;
    const Preset preset = make_preset(p);
    const auto& spec = *preset.spec;
    const double M = spec.constants().M;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const AssumptionReport r = validate_assumptions(spec.theta1(), spec.X(), spec.constants(), 1000, seed);
      CHECK(r.max_norm <= M);
      CHECK(r.second_moment.mean <= M * M);
      CHECK_FALSE(r.M_violated);
    }
  }
  SUBCASE("understated sigma is flagged") {
    AdditiveNoiseModel model(base, NoiseKind::gaussian, 2.0);
    c.sigma = 1.0;
    const AssumptionReport r = validate_assumptions(model, Ball{1.0}, c, 10000, 5);
    CHECK(r.sigma_violated);
  }
}
