#include "sadmm/presets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace sadmm {

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Matrix gaussian_matrix(Index rows, Index cols, CounterRng& rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

Matrix orthonormal_columns(Index rows, Index cols, CounterRng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(rows, cols, rng));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

double max_eig(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

Matrix edge_difference(int nodes, int edges, std::uint64_t seed) {
  std::vector<std::pair<int, int>> list;
  if (edges <= 0) {
    for (int i = 0; i + 1 < nodes; ++i) list.emplace_back(i, i + 1);
  } else {
    CounterRng rng(seed, streams::kData, 7);
    std::uniform_int_distribution<int> pick(0, nodes - 1);
    while (static_cast<int>(list.size()) < edges) {
      int i = pick(rng);
      int j = pick(rng);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (std::find(list.begin(), list.end(), std::make_pair(i, j)) != list.end()) continue;
      list.emplace_back(i, j);
    }
  }
  Matrix D = Matrix::Zero(static_cast<Index>(list.size()), nodes);
  for (std::size_t e = 0; e < list.size(); ++e) {
    D(static_cast<Index>(e), list[e].first) = 1.0;
    D(static_cast<Index>(e), list[e].second) = -1.0;
  }
  return D;
}

struct Theta1Build {
  std::shared_ptr<const StochasticModel> model;
  ProblemConstants constants;
};

// Wraps the least-squares (or hinge) data in the requested oracle and
// certifies M pointwise over the ball of radius R.
Theta1Build least_squares_theta1(const RegressionData& data, double ridge, const PresetParams& p) {
  const Index n = data.a.rows();
  std::vector<SumComponent> comps;
  comps.reserve(static_cast<std::size_t>(n));
  double m_fs = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vector a = data.a.row(i).transpose();
    const double an = a.norm();
    m_fs = std::max(m_fs, an * (an * p.radius + std::abs(data.target[i])));
    comps.push_back(LeastSquaresTerm{a, data.target[i]});
  }
  m_fs += ridge * p.radius;
  auto fs = std::make_shared<FiniteSumModel>(std::move(comps), ridge, p.minibatch);
  const QuadraticForm q = *fs->quadratic_form();

  Theta1Build out;
  out.constants.mu = ridge;
  out.constants.L = max_eig(q.hessian);
  const double g_max = *out.constants.L * p.radius + q.linear.norm();
  switch (p.oracle) {
    case OracleKind::finite_sum:
      out.model = fs;
      out.constants.M = m_fs;
      out.constants.sigma = m_fs;
      break;
    case OracleKind::additive_gaussian:
    case OracleKind::additive_uniform:
    case OracleKind::exact: {
      auto base = std::make_shared<QuadraticObjective>(q);
      const NoiseKind kind = p.oracle == OracleKind::additive_gaussian ? NoiseKind::gaussian
                             : p.oracle == OracleKind::additive_uniform ? NoiseKind::uniform
                                                                        : NoiseKind::none;
      const double sigma = kind == NoiseKind::none ? 0.0 : p.sigma;
      out.model = std::make_shared<AdditiveNoiseModel>(base, kind, sigma);
      out.constants.sigma = sigma;
      out.constants.M = kind == NoiseKind::gaussian ? std::sqrt(g_max * g_max + sigma * sigma)
                                                    : g_max + std::sqrt(3.0) * sigma;
      break;
    }
  }
  return out;
}

void check_params(const PresetParams& p) {
  if (p.dim < 1) throw ConfigError("preset.dim: must be >= 1");
  if (p.samples < 1) throw ConfigError("preset.samples: must be >= 1");
  if (!(p.condition >= 1.0)) throw ConfigError("preset.condition: must be >= 1");
  if (!(p.noise >= 0.0)) throw ConfigError("preset.noise: must be >= 0");
  if (!(p.lambda_reg >= 0.0)) throw ConfigError("preset.lambda_reg: must be >= 0");
  if (!(p.mu >= 0.0)) throw ConfigError("preset.mu: must be >= 0");
  if (!(p.radius > 0.0)) throw ConfigError("preset.radius: must be positive");
  if (!(p.sigma >= 0.0)) throw ConfigError("preset.sigma: must be >= 0");
  if (p.minibatch < 1) throw ConfigError("preset.minibatch: must be >= 1");
  if (p.edges < 0) throw ConfigError("preset.edges: must be >= 0");
}

}  // namespace

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::finite_sum:
      return "finite-sum";
    case OracleKind::additive_gaussian:
      return "additive-gaussian";
    case OracleKind::additive_uniform:
      return "additive-uniform";
    case OracleKind::exact:
      return "exact";
  }
  return "unknown";
}

OracleKind parse_oracle_kind(const std::string& text) {
  if (text == "finite-sum") return OracleKind::finite_sum;
  if (text == "additive-gaussian") return OracleKind::additive_gaussian;
  if (text == "additive-uniform") return OracleKind::additive_uniform;
  if (text == "exact") return OracleKind::exact;
  throw ConfigError("unknown oracle '" + text +
                    "' (expected finite-sum, additive-gaussian, additive-uniform, exact)");
}

std::vector<std::string> preset_names() {
  return {"lasso-split",  "fused-lasso-graph", "hinge-svm-split",
          "strongly-convex-lasso", "ridge-split", "scalar-quadratic"};
}

RegressionData make_regression_data(int dim, int samples, double condition, double noise,
                                    std::uint64_t seed) {
  if (samples < dim) throw ConfigError("preset.samples: must be >= dim");
  CounterRng rng(seed, streams::kData, 0);
  const Index d = dim;
  const Index n = samples;
  const Matrix U = orthonormal_columns(n, d, rng);
  const Matrix V = orthonormal_columns(d, d, rng);
  Vector s(d);
  for (Index j = 0; j < d; ++j) {
    const double frac = d > 1 ? static_cast<double>(j) / static_cast<double>(d - 1) : 0.0;
    s[j] = std::sqrt(static_cast<double>(n) * std::pow(condition, -frac));
  }
  RegressionData out;
  out.a = U * s.asDiagonal() * V.transpose();

  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  out.x_true = Vector::Zero(d);
  std::bernoulli_distribution coin;
  const Index nnz = std::max<Index>(1, d / 4);
  for (Index i = 0; i < nnz; ++i) out.x_true[order[static_cast<std::size_t>(i)]] = coin(rng) ? 0.5 : -0.5;

  std::normal_distribution<double> normal;
  out.target = out.a * out.x_true;
  for (Index i = 0; i < n; ++i) out.target[i] += noise * normal(rng);
  return out;
}

Preset make_preset(const PresetParams& p) {
  check_params(p);
  const Index d = p.dim;
  Preset out;
  out.params = p;
  std::ostringstream desc;

  if (p.name == "lasso-split" || p.name == "strongly-convex-lasso" || p.name == "ridge-split") {
    const double ridge = p.name == "strongly-convex-lasso" ? p.mu : 0.0;
    const RegressionData data = make_regression_data(p.dim, p.samples, p.condition, p.noise, p.seed);
    Theta1Build t1 = least_squares_theta1(data, ridge, p);
    Regularizer theta2 = p.name == "ridge-split" ? Regularizer{SquaredL2{p.lambda_reg}}
                                                 : Regularizer{L1Norm{p.lambda_reg}};
    out.spec = std::make_shared<ProblemSpec>(t1.model, theta2, Matrix::Identity(d, d),
                                             -Matrix::Identity(d, d), Vector::Zero(d),
                                             Ball{p.radius}, WholeSpace{}, t1.constants);
    desc << p.name << ": least squares (n=" << p.samples << ", d=" << p.dim << ") + "
         << name(theta2) << ", x = y";
  } else if (p.name == "fused-lasso-graph") {
    const RegressionData data = make_regression_data(p.dim, p.samples, p.condition, p.noise, p.seed);
    Theta1Build t1 = least_squares_theta1(data, 0.0, p);
    const Matrix D = edge_difference(p.dim, p.edges, p.seed);
    const Index m = D.rows();
    if (m == 0) throw ConfigError("preset.dim: the graph needs at least one edge");
    out.spec = std::make_shared<ProblemSpec>(t1.model, L1Norm{p.lambda_reg}, D,
                                             -Matrix::Identity(m, m), Vector::Zero(m),
                                             Ball{p.radius}, WholeSpace{}, t1.constants);
    desc << p.name << ": least squares (n=" << p.samples << ", d=" << p.dim << ") + l1 on "
         << m << " edge differences";
  } else if (p.name == "hinge-svm-split") {
    const RegressionData data = make_regression_data(p.dim, p.samples, p.condition, p.noise, p.seed);
    std::vector<SumComponent> comps;
    double m_bound = 0.0;
    for (Index i = 0; i < data.a.rows(); ++i) {
      const Vector a = data.a.row(i).transpose();
      comps.push_back(HingeTerm{a, data.target[i] >= 0.0 ? 1.0 : -1.0});
      m_bound = std::max(m_bound, a.norm());
    }
    if (p.oracle != OracleKind::finite_sum) {
      throw ConfigError("preset.oracle: hinge-svm-split supports only the finite-sum oracle");
    }
    ProblemConstants c;
    c.M = m_bound;
    c.sigma = m_bound;
    auto model = std::make_shared<FiniteSumModel>(std::move(comps), 0.0, p.minibatch);
    out.spec = std::make_shared<ProblemSpec>(model, SquaredL2{p.lambda_reg}, Matrix::Identity(d, d),
                                             -Matrix::Identity(d, d), Vector::Zero(d),
                                             Ball{p.radius}, WholeSpace{}, c);
    desc << p.name << ": mean hinge loss (n=" << p.samples << ", d=" << p.dim
         << ") + squared l2, x = y";
  } else if (p.name == "scalar-quadratic") {
    if (p.oracle == OracleKind::finite_sum) {
      throw ConfigError(
          "preset.oracle: scalar-quadratic needs additive-gaussian, additive-uniform or exact");
    }
    QuadraticForm q{Matrix::Identity(1, 1), Vector::Zero(1), 0.0};
    auto base = std::make_shared<QuadraticObjective>(q);
    const NoiseKind kind = p.oracle == OracleKind::additive_gaussian ? NoiseKind::gaussian
                           : p.oracle == OracleKind::additive_uniform ? NoiseKind::uniform
                                                                      : NoiseKind::none;
    const double sigma = kind == NoiseKind::none ? 0.0 : p.sigma;
    ProblemConstants c;
    c.sigma = sigma;
    c.L = 1.0;
    c.mu = 1.0;
    c.M = kind == NoiseKind::gaussian ? std::sqrt(p.radius * p.radius + sigma * sigma)
                                      : p.radius + std::sqrt(3.0) * sigma;
    auto model = std::make_shared<AdditiveNoiseModel>(base, kind, sigma);
    out.spec = std::make_shared<ProblemSpec>(model, SquaredL2{1.0}, Matrix::Identity(1, 1),
                                             -Matrix::Identity(1, 1), Vector::Zero(1),
                                             Ball{p.radius}, WholeSpace{}, c);
    desc << p.name << ": x^2/2 + y^2/2 s.t. x = y";
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("preset.name: unknown preset '" + p.name + "' (expected " + names + ")");
  }
  desc << ", oracle " << to_string(p.oracle);
  out.description = desc.str();
  return out;
}

std::string fingerprint(const PresetParams& p) {
  std::ostringstream os;
  os << "name=" << p.name << ";dim=" << p.dim << ";samples=" << p.samples
     << ";condition=" << num(p.condition) << ";noise=" << num(p.noise)
     << ";lambda_reg=" << num(p.lambda_reg) << ";mu=" << num(p.mu) << ";radius=" << num(p.radius)
     << ";seed=" << p.seed << ";oracle=" << to_string(p.oracle) << ";sigma=" << num(p.sigma)
     << ";minibatch=" << p.minibatch << ";edges=" << p.edges;
  return os.str();
}

}  // namespace sadmm
