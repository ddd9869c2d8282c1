#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sadmm/prox.hpp"

using namespace sadmm;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector randn(std::mt19937_64& gen, Index d, double scale = 1.0) {
  std::normal_distribution<double> n01;
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = scale * n01(gen);
  return v;
}

Box unit_box(Index d) {
  return Box{Vector::Constant(d, -1.0), Vector::Constant(d, 1.0)};
}

}  // namespace

TEST_CASE("projection examples") {
  CHECK(project(vec({0.1, 0.2}), Ball{1.0}) == vec({0.1, 0.2}));
  const Vector p = project(vec({3, 4}), Ball{1.0});
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(project(vec({2, -3}), FeasibleSet{unit_box(2)}) == vec({1, -1}));
  CHECK(project(vec({5, -7}), WholeSpace{}) == vec({5, -7}));
}

TEST_CASE("projection is idempotent") {
  std::mt19937_64 gen(1);
  Box box{vec({-1, 0, 2}), vec({0.5, 3, 2.5})};
  for (const FeasibleSet& set : {FeasibleSet{Ball{1.3}}, FeasibleSet{box}, FeasibleSet{WholeSpace{}}}) {
    for (int i = 0; i < 100; ++i) {
      const Vector once = project(randn(gen, 3, 3.0), set);
      CHECK(project(once, set) == once);
    }
  }
}

TEST_CASE("prox_theta2 closed forms") {
  const Vector l1 = prox_theta2(vec({2, -0.5, -3}), 1.0, L1Norm{1.0});
  CHECK(l1 == vec({1, 0, -2}));
  const Vector l1b = prox_theta2(vec({2, -0.5, -3}), 4.0, L1Norm{4.0});
  CHECK(l1b == vec({1, 0, -2}));

  const Vector z = vec({3, 4});
  CHECK(prox_theta2(z, 2.0, IndicatorOnly{}, Ball{1.0}) == project(z, Ball{1.0}));
  CHECK(prox_theta2(z, 2.0, IndicatorOnly{}) == z);

  const Vector h = prox_theta2(vec({0}), 1.0, HingeSum{1.0});
  const double grid = oracles::grid_argmin_1d(
      [](double y) { return std::max(0.0, 1 - y) + 0.5 * y * y; }, -5, 5, 1e-9);
  CHECK(h[0] == 1.0);
  CHECK(std::abs(h[0] - grid) <= 1e-6);

  // Off-kink branches of the hinge map agree with grid search.
  for (double zz : {-3.0, 0.2, 0.5, 1.0, 1.7, 4.0}) {
    for (double c : {0.5, 2.0}) {
      const double y = prox_theta2(vec({zz}), c, HingeSum{0.8})[0];
      const double g = oracles::grid_argmin_1d(
          [&](double v) { return 0.8 * std::max(0.0, 1 - v) + 0.5 * c * (v - zz) * (v - zz); }, -10, 10, 1e-10);
      CHECK(std::abs(y - g) <= 1e-8);
    }
  }

  const Vector sq = prox_theta2(vec({3}), 1.0, SquaredL2{2.0});
  CHECK(sq[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("prox optimality and non-expansiveness over the catalog") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> cdist(0.1, 5.0);
  const std::vector<Regularizer> regs{L1Norm{0.7}, SquaredL2{1.3}, HingeSum{0.9}, IndicatorOnly{}};
  const std::vector<FeasibleSet> sets{WholeSpace{}, Ball{1.5}, FeasibleSet{Box{vec({-1, -0.5, 0, -2}), vec({2, 0.5, 1, 3})}}};
  for (const auto& reg : regs) {
    for (const auto& Y : sets) {
      for (int trial = 0; trial < 20; ++trial) {
        const Vector z = randn(gen, 4, 2.0);
        const double c = cdist(gen);
        const Vector y = prox_theta2(z, c, reg, Y);
        CHECK(contains(Y, y, 1e-12));
        const double fy = evaluate(reg, y) + 0.5 * c * (y - z).squaredNorm();
        CounterRng rng(1, 2, static_cast<std::uint64_t>(trial));
        for (int p = 0; p < 50; ++p) {
          const Vector yp = sample_point(Y, 4, rng, y, 1.0);
          const double fp = evaluate(reg, yp) + 0.5 * c * (yp - z).squaredNorm();
          CHECK(fy <= fp + 1e-10);
        }
        const Vector z2 = randn(gen, 4, 2.0);
        const Vector y2 = prox_theta2(z2, c, reg, Y);
        CHECK((y - y2).norm() <= (z - z2).norm() + 1e-12);
      }
    }
  }
}

TEST_CASE("y-update refuses the prox path for general B") {
  Matrix B(2, 2);
  B << 1, 1, 0, 1;
  ProblemConstants c;
  const ProblemSpec spec(oracles::exact_quadratic(Matrix::Identity(2, 2), Vector::Zero(2)), L1Norm{1.0},
                         Matrix::Identity(2, 2), B, Vector::Zero(2), Ball{1}, WholeSpace{}, c);
  CHECK_THROWS_AS(YSubproblemSolver(spec, YUpdateMode::prox), ConfigError);
  CHECK_NOTHROW(YSubproblemSolver(spec, YUpdateMode::automatic));
  CHECK(scaled_identity(-2.0 * Matrix::Identity(3, 3)) == -2.0);
  CHECK_FALSE(scaled_identity(B));
}

TEST_CASE("x-subproblem closed forms") {
  SUBCASE("scalar example") {
    const ProblemSpec spec = oracles::scalar_instance(WholeSpace{10.0});
    IterateState st = IterateState::initial(vec({0}), vec({0}), 1);
    const Vector x = solve_x_subproblem(vec({1}), st, spec, 1.0, 1.0);
    // (beta A'A + 1/eta) x = x_k/eta - g + beta A'(b + lambda/beta - B y_k)
    const double dense = Matrix::Constant(1, 1, 2.0).lu().solve(Vector::Constant(1, -1.0))[0];
    CHECK(x[0] == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(x[0] == doctest::Approx(dense).epsilon(1e-15));
  }
  SUBCASE("no coupling term gives a gradient step") {
    ProblemConstants c;
    const ProblemSpec spec(oracles::exact_quadratic(Matrix::Identity(3, 3), Vector::Zero(3)), IndicatorOnly{},
                           Matrix::Zero(3, 3), -Matrix::Identity(3, 3), Vector::Zero(3), WholeSpace{5.0},
                           WholeSpace{}, c);
    IterateState st = IterateState::initial(vec({1, 2, 3}), Vector::Zero(3), 3);
    const Vector g = vec({0.5, -1, 2});
    const double eta = 0.3;
    const Vector x = solve_x_subproblem(g, st, spec, 1.0, eta);
    CHECK((x - (st.x - eta * g)).norm() <= 1e-15);
  }
}

TEST_CASE("x-subproblem optimality on constrained sets") {
  std::mt19937_64 gen(13);
  Matrix A(4, 3);
  for (Index i = 0; i < A.size(); ++i) A.data()[i] = std::normal_distribution<double>()(gen);
  const Matrix B = -Matrix::Identity(4, 4);
  ProblemConstants c;
  const std::vector<FeasibleSet> sets{Ball{0.5}, FeasibleSet{unit_box(3)}, Ball{100.0}};
  for (const auto& X : sets) {
    const ProblemSpec spec(oracles::exact_quadratic(Matrix::Identity(3, 3), Vector::Zero(3)), L1Norm{1.0}, A, B,
                           randn(gen, 4), X, WholeSpace{}, c);
    XSubproblemSolver solver(spec);
    for (int trial = 0; trial < 20; ++trial) {
      IterateState st = IterateState::initial(project(randn(gen, 3), X), randn(gen, 4), 4);
      st.lambda = randn(gen, 4);
      const Vector g = randn(gen, 3, 3.0);
      const double beta = 0.5 + trial * 0.1;
      const double eta = 0.05 * (trial + 1);
      const Vector x = solver.solve(g, st, beta, eta);
      CHECK(contains(X, x, 1e-12));
      const Vector grad = solver.smooth_gradient(x, g, st, beta) + (x - st.x) / eta;
      CounterRng rng(5, 6, static_cast<std::uint64_t>(trial));
      for (int p = 0; p < 50; ++p) {
        const Vector xp = sample_point(X, 3, rng, x, 1.0);
        CHECK(grad.dot(xp - x) >= -1e-8);
        // Three-points relation with l the linear-plus-coupling part and s = 1/eta.
        const Vector gl = solver.smooth_gradient(x, g, st, beta);
        CHECK(three_points_check(x, st.x, xp, gl, 1.0 / eta, 1e-9));
      }
    }
  }
}

TEST_CASE("three-points relation examples") {
  const Vector u = vec({0.5, -0.5});
  CHECK(three_points_residual(u, u, u, vec({1, 2}), 3.0) == 0.0);
  CHECK(three_points_check(u, u, u, vec({1, 2}), 3.0));

  // l(x) = <a, x>, unconstrained: x* = u - a/s, so g(x*) = a = -s (x* - u).
  const Vector a = vec({0.3, -1.2});
  const double s = 2.5;
  const Vector xs = u - a / s;
  std::mt19937_64 gen(2);
  for (int i = 0; i < 20; ++i) {
    const Vector probe = randn(gen, 2, 3.0);
    const double r = three_points_residual(xs, u, probe, a, s);
    CHECK(std::abs(r) <= 1e-12 * (1.0 + probe.squaredNorm()));
  }
}

TEST_CASE("inner loop reports its residual when it runs out of iterations") {
  Matrix H(2, 2);
  H << 1, 0.99, 0.99, 1;
  QuadraticSubproblem sub(H, FeasibleSet{unit_box(2)}, InnerSolverOptions{1e-14, 2});
  try {
    (void)sub.solve(vec({3, 0.5}), 0.0);
    FAIL("expected InnerSolverError");
  } catch (const InnerSolverError& e) {
    CHECK(e.residual() > 1e-14);
  }
}

TEST_CASE("quadratic subproblem matches the dense solve in the interior") {
  Matrix H(2, 2);
  H << 3, 1, 1, 2;
  QuadraticSubproblem sub(H, WholeSpace{});
  const Vector q = vec({1, -1});
  for (double shift : {0.0, 0.5, 0.5, 2.0}) {
    const Vector x = sub.solve(q, shift);
    const Vector ref = (H + shift * Matrix::Identity(2, 2)).fullPivLu().solve(q);
    CHECK((x - ref).norm() <= 1e-14);
  }
  CHECK(sub.factorizations() == 3);
}
