#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sadmm/types.hpp"

using namespace sadmm;

namespace {

ProblemSpec small_spec(const Matrix& A, const Matrix& B, const Vector& b) {
  ProblemConstants c;
  c.M = 1.0;
  return ProblemSpec(oracles::exact_quadratic(Matrix::Identity(A.cols(), A.cols()), Vector::Zero(A.cols())),
                     IndicatorOnly{}, A, B, b, Ball{1.0}, WholeSpace{}, c);
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("stack packs and unstack inverts") {
  const StackedW w = stack(vec({1}), vec({2}), vec({3}));
  CHECK(w.x[0] == 1);
  CHECK(w.y[0] == 2);
  CHECK(w.lambda[0] == 3);

  const StackedW z = stack(Vector::Zero(2), Vector::Zero(3), Vector::Zero(1));
  CHECK(z.flatten().size() == 6);
  CHECK(z.flatten().isZero(0.0));

  const Vector x = vec({1.5, -2}), y = vec({0.25, 4, -1}), l = vec({7});
  const StackedW back = unstack(stack(x, y, l).flatten(), 2, 3, 1);
  CHECK(back.x == x);
  CHECK(back.y == y);
  CHECK(back.lambda == l);
}

TEST_CASE("stack rejects wrong dimensions") {
  const ProblemSpec spec = small_spec(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2));
  CHECK_THROWS_AS(stack(vec({1}), vec({1, 2}), vec({1, 2}), spec), DimensionError);
  CHECK_THROWS_AS(unstack(Vector::Zero(5), 2, 2, 2), DimensionError);
}

TEST_CASE("eval_F on hand examples") {
  {
    const ProblemSpec spec = small_spec(Matrix::Identity(1, 1), Matrix::Identity(1, 1), vec({0}));
    const StackedW F = eval_F(stack(vec({0}), vec({0}), vec({0})), spec);
    CHECK(F.flatten().isZero(0.0));
  }
  const Matrix A = Matrix::Identity(1, 1);
  const Matrix B = -Matrix::Identity(1, 1);
  const ProblemSpec spec = small_spec(A, B, vec({0}));
  const StackedW F = eval_F(stack(vec({1}), vec({1}), vec({2})), spec);
  CHECK(F.x[0] == -2);
  CHECK(F.y[0] == 2);
  CHECK(F.lambda[0] == 0);

  // Against plain-loop algebra on a random rectangular instance.
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n01;
  Matrix A2(3, 4), B2(3, 2);
  for (Index i = 0; i < A2.size(); ++i) A2.data()[i] = n01(gen);
  for (Index i = 0; i < B2.size(); ++i) B2.data()[i] = n01(gen);
  const Vector b2 = vec({0.5, -1, 2});
  const ProblemSpec spec2 = small_spec(A2, B2, b2);
  const Vector x = vec({1, 2, 3, 4}), y = vec({-1, 0.5}), l = vec({0.3, -0.7, 1.1});
  const StackedW F2 = eval_F(stack(x, y, l), spec2);
  const auto ax = oracles::matvec(A2, oracles::to_std(x));
  const auto by = oracles::matvec(B2, oracles::to_std(y));
  const auto atl = oracles::matvec_t(A2, oracles::to_std(l));
  const auto btl = oracles::matvec_t(B2, oracles::to_std(l));
  for (int i = 0; i < 4; ++i) CHECK(F2.x[i] == doctest::Approx(-atl[i]).epsilon(1e-14));
  for (int i = 0; i < 2; ++i) CHECK(F2.y[i] == doctest::Approx(-btl[i]).epsilon(1e-14));
  for (int i = 0; i < 3; ++i) CHECK(F2.lambda[i] == doctest::Approx(ax[i] + by[i] - b2[i]).epsilon(1e-14));
}

TEST_CASE("F is skew: <F(w1) - F(w2), w1 - w2> vanishes") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n01;
  Matrix A(4, 3), B(4, 5);
  for (Index i = 0; i < A.size(); ++i) A.data()[i] = n01(gen);
  for (Index i = 0; i < B.size(); ++i) B.data()[i] = n01(gen);
  Vector b(4);
  for (Index i = 0; i < 4; ++i) b[i] = n01(gen);
  const ProblemSpec spec = small_spec(A, B, b);
  auto random_w = [&] {
    Vector f(12);
    for (Index i = 0; i < 12; ++i) f[i] = n01(gen);
    return unstack(f, 3, 5, 4);
  };
  for (int trial = 0; trial < 100; ++trial) {
    const StackedW w1 = random_w(), w2 = random_w();
    const StackedW dF = eval_F(w1, spec) - eval_F(w2, spec);
    const StackedW dw = w1 - w2;
    const double scale = dF.flatten().norm() * dw.flatten().norm();
    CHECK(std::abs(dF.dot(dw)) <= 1e-12 * scale);
  }
}

TEST_CASE("err_rho components") {
  const ProblemSpec spec = oracles::scalar_instance();
  // u* = 0, theta* = 0.
  const ErrRho at_opt = err_rho(vec({0}), vec({0}), spec, vec({0}), vec({0}), 1.0);
  CHECK(at_opt.value == 0.0);

  // Feasible with theta = 0.5 above the optimum: x = y = sqrt(0.5).
  const double s = std::sqrt(0.5);
  for (double rho : {0.1, 1.0, 10.0}) {
    const ErrRho e = err_rho(vec({s}), vec({s}), spec, vec({0}), vec({0}), rho);
    CHECK(e.feasibility == 0.0);
    CHECK(e.value == doctest::Approx(0.5).epsilon(1e-15));
  }

  // Infeasible point on a multi-row instance; residual via a second norm routine.
  Matrix A(2, 1);
  A << 1, 2;
  Matrix B(2, 1);
  B << -1, 0.5;
  const Vector b = vec({0.5, -1});
  ProblemConstants c;
  c.M = 1;
  const ProblemSpec spec2(oracles::exact_quadratic(Matrix::Identity(1, 1), Vector::Zero(1)), SquaredL2{2.0}, A, B,
                          b, Ball{5}, WholeSpace{}, c);
  const Vector xb = vec({0.7}), yb = vec({-0.3});
  ReferencePoint ref{vec({0.1}), vec({0.2}), 0.123};
  const ErrRho e = err_rho(xb, yb, spec2, ref, 2.5);
  const auto ax = oracles::matvec(A, oracles::to_std(xb));
  const auto by = oracles::matvec(B, oracles::to_std(yb));
  const double r = oracles::norm2({ax[0] + by[0] - b[0], ax[1] + by[1] - b[1]});
  const double gap = 0.5 * 0.49 + 0.5 * 2.0 * 0.09 - 0.123;
  CHECK(e.gap == doctest::Approx(gap).epsilon(1e-14));
  CHECK(e.feasibility == doctest::Approx(r).epsilon(1e-14));
  CHECK(e.value == doctest::Approx(gap + 2.5 * r).epsilon(1e-14));

  CHECK_THROWS_AS(err_rho(xb, yb, spec2, ref, 0.0), ConfigError);
}

TEST_CASE("accumulators reproduce batch means") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  const Index d1 = 3, d2 = 2, m = 2;
  auto rnd = [&](Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = 10.0 * n01(gen) + 3.0;
    return v;
  };
  std::vector<Vector> xs{rnd(d1)}, ys{rnd(d2)}, ls{Vector::Zero(m)};
  IterateState st = IterateState::initial(xs[0], ys[0], m);
  CHECK(st.lambda.isZero(0.0));
  const std::size_t T = 10000;
  for (std::size_t k = 1; k <= T; ++k) {
    xs.push_back(rnd(d1));
    ys.push_back(rnd(d2));
    ls.push_back(rnd(m));
    st.advance(xs.back(), ys.back(), ls.back());
    if (k == 1 || k == 7 || k == 100 || k == T) {
      Vector sx_shift = Vector::Zero(d1), sx_align = Vector::Zero(d1), sy = Vector::Zero(d2), sl = Vector::Zero(m);
      for (std::size_t i = 0; i < k; ++i) sx_shift += xs[i];
      for (std::size_t i = 1; i <= k; ++i) {
        sx_align += xs[i];
        sy += ys[i];
        sl += ls[i];
      }
      const double kk = static_cast<double>(k);
      CHECK((st.avg_x_shifted - sx_shift / kk).norm() <= 1e-10 * (sx_shift / kk).norm());
      CHECK((st.avg_x_aligned - sx_align / kk).norm() <= 1e-10 * (sx_align / kk).norm());
      CHECK((st.avg_y - sy / kk).norm() <= 1e-10 * (sy / kk).norm());
      CHECK((st.avg_lambda - sl / kk).norm() <= 1e-10 * (sl / kk).norm());
      CHECK(st.k == k);
    }
  }
}

TEST_CASE("diameter matches sampled sup-distance") {
  const Vector c = Vector::Zero(2);
  const FeasibleSet ball = Ball{1.5};
  Box box;
  box.lower = vec({-1, 0});
  box.upper = vec({2, 0.5});
  for (const FeasibleSet& set : {ball, FeasibleSet{box}}) {
    const double D = diameter(set);
    CounterRng rng(1, 2, 3);
    double best = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const Vector p = sample_point(set, 2, rng, c, 1.0);
      const Vector q = sample_point(set, 2, rng, c, 1.0);
      CHECK(contains(set, p, 1e-12));
      best = std::max(best, (p - q).norm());
    }
    CHECK(best <= D);
    CHECK(best >= 0.95 * D);
  }
  CHECK(diameter(ball) == 3.0);
  CHECK(diameter(FeasibleSet{box}) == doctest::Approx(std::sqrt(9.0 + 0.25)));
  CHECK(diameter(WholeSpace{7.0}) == 7.0);
}

TEST_CASE("ProblemSpec validates its invariants") {
  auto t1 = oracles::exact_quadratic(Matrix::Identity(2, 2), Vector::Zero(2));
  ProblemConstants c;
  auto make = [&](Matrix A, Matrix B, Vector b, FeasibleSet X, ProblemConstants k) {
    return ProblemSpec(t1, L1Norm{1}, std::move(A), std::move(B), std::move(b), std::move(X), WholeSpace{}, k);
  };
  CHECK_NOTHROW(make(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2), Ball{1}, c));
  CHECK_THROWS_AS(make(Matrix::Identity(2, 2), -Matrix::Identity(3, 3), Vector::Zero(2), Ball{1}, c), DimensionError);
  CHECK_THROWS_AS(make(Matrix::Identity(3, 3), -Matrix::Identity(3, 3), Vector::Zero(3), Ball{1}, c), DimensionError);
  CHECK_THROWS_AS(make(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2), WholeSpace{}, c), ConfigError);
  CHECK_NOTHROW(make(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2), WholeSpace{4.0}, c));
  ProblemConstants bad = c;
  bad.M = 0;
  CHECK_THROWS_AS(make(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2), Ball{1}, bad), ConfigError);
  bad = c;
  bad.mu = -1;
  CHECK_THROWS_AS(make(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2), Ball{1}, bad), ConfigError);
  bad = c;
  bad.L = 0.0;
  CHECK_THROWS_AS(make(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Vector::Zero(2), Ball{1}, bad), ConfigError);
}
