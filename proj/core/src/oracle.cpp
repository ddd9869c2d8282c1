#include "sadmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sadmm {

namespace {

Vector soft_threshold(const Vector& v, double t) {
  return v.array().sign() * (v.array().abs() - t).max(0.0);
}

// Each component's exact value and (sub)gradient, ridge excluded.
SubgradientSample eval_component(const SumComponent& c, const Vector& x) {
  if (const auto* ls = std::get_if<LeastSquaresTerm>(&c)) {
    const double r = ls->a.dot(x) - ls->target;
    return {0.5 * r * r, ls->a * r};
  }
  const auto& h = std::get<HingeTerm>(c);
  const double margin = h.label * h.a.dot(x);
  if (margin < 1.0) return {1.0 - margin, -h.label * h.a};
  return {0.0, Vector::Zero(x.size())};
}

const Vector& component_vector(const SumComponent& c) {
  return std::visit([](const auto& t) -> const Vector& { return t.a; }, c);
}

}  // namespace

// ---------------------------------------------------------------------------

QuadraticObjective::QuadraticObjective(QuadraticForm form) : form_(std::move(form)) {
  if (form_.hessian.rows() != form_.linear.size() || form_.hessian.cols() != form_.linear.size()) {
    throw DimensionError("QuadraticObjective: Hessian and linear term disagree in dimension");
  }
}

std::optional<Vector> QuadraticObjective::prox(const Vector& v, double c) const {
  Matrix system = form_.hessian;
  system.diagonal().array() += c;
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt.solve(c * v - form_.linear);
}

bool QuadraticObjective::separable() const {
  const Matrix& H = form_.hessian;
  return (H - Matrix(H.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
}

Vector L1Objective::subgradient(const Vector& x) const { return weight_ * x.array().sign().matrix(); }

std::optional<Vector> L1Objective::prox(const Vector& v, double c) const {
  return soft_threshold(v, weight_ / c);
}

// ---------------------------------------------------------------------------

FiniteSumModel::FiniteSumModel(std::vector<SumComponent> components, double ridge, int minibatch)
    : components_(std::move(components)), ridge_(ridge), minibatch_(minibatch) {
  if (components_.empty()) throw ConfigError("FiniteSumModel: needs at least one component");
  if (minibatch_ < 1) throw ConfigError("FiniteSumModel: minibatch must be >= 1");
  if (ridge_ < 0.0) throw ConfigError("FiniteSumModel: ridge must be nonnegative");
  dim_ = component_vector(components_.front()).size();
  for (const auto& c : components_) {
    if (component_vector(c).size() != dim_) {
      throw DimensionError("FiniteSumModel: components disagree in dimension");
    }
    all_least_squares_ = all_least_squares_ && std::holds_alternative<LeastSquaresTerm>(c);
    all_hinge_ = all_hinge_ && std::holds_alternative<HingeTerm>(c);
  }
  if (all_least_squares_) {
    const double n = static_cast<double>(components_.size());
    QuadraticForm q{Matrix::Zero(dim_, dim_), Vector::Zero(dim_), 0.0};
    for (const auto& c : components_) {
      const auto& ls = std::get<LeastSquaresTerm>(c);
      q.hessian.noalias() += ls.a * ls.a.transpose();
      q.linear -= ls.target * ls.a;
      q.constant += 0.5 * ls.target * ls.target;
    }
    q.hessian /= n;
    q.linear /= n;
    q.constant /= n;
    q.hessian.diagonal().array() += ridge_;
    quadratic_ = std::move(q);
  }
}

SubgradientSample FiniteSumModel::component(std::size_t i, const Vector& x) const {
  SubgradientSample s = eval_component(components_.at(i), x);
  if (ridge_ != 0.0) {
    s.value += 0.5 * ridge_ * x.squaredNorm();
    s.subgradient += ridge_ * x;
  }
  return s;
}

double FiniteSumModel::value(const Vector& x) const {
  if (quadratic_) return quadratic_->value(x);
  double total = 0.0;
  for (const auto& c : components_) total += eval_component(c, x).value;
  return total / static_cast<double>(components_.size()) + 0.5 * ridge_ * x.squaredNorm();
}

Vector FiniteSumModel::subgradient(const Vector& x) const {
  if (quadratic_) return quadratic_->gradient(x);
  Vector total = Vector::Zero(dim_);
  for (const auto& c : components_) total += eval_component(c, x).subgradient;
  return total / static_cast<double>(components_.size()) + ridge_ * x;
}

SubgradientSample FiniteSumModel::sample(const Vector& x, CounterRng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, components_.size() - 1);
  if (minibatch_ == 1) return component(pick(rng), x);
  SubgradientSample out{0.0, Vector::Zero(dim_)};
  for (int j = 0; j < minibatch_; ++j) {
    const auto s = eval_component(components_[pick(rng)], x);
    out.value += s.value;
    out.subgradient += s.subgradient;
  }
  out.value = out.value / minibatch_ + 0.5 * ridge_ * x.squaredNorm();
  out.subgradient = out.subgradient / minibatch_ + ridge_ * x;
  return out;
}

std::optional<Vector> FiniteSumModel::prox(const Vector& v, double c) const {
  if (quadratic_) {
    Matrix system = quadratic_->hessian;
    system.diagonal().array() += c;
    return Eigen::LLT<Matrix>(system).solve(c * v - quadratic_->linear);
  }
  if (all_hinge_) return hinge_prox(v, c);
  return std::nullopt;
}

// argmin (1/n) sum_i max(0, 1 - l_i a_i'x) + (kappa/2)||x - z||^2 with
// kappa = ridge + c, z = c v / kappa. Dual coordinate ascent over alpha in
// [0,1]^n with x = z + (1/(kappa n)) sum_i alpha_i l_i a_i finds the active
// set; the multipliers strictly inside (0,1) are then solved for exactly from
// l_i a_i'x = 1 and the result is kept once the KKT conditions verify.
std::optional<Vector> FiniteSumModel::hinge_prox(const Vector& v, double c) const {
  const double kappa = ridge_ + c;
  const std::size_t n_comp = components_.size();
  const double n = static_cast<double>(n_comp);
  const Vector z = (c / kappa) * v;
  Vector x = z;
  std::vector<double> alpha(n_comp, 0.0);
  std::vector<double> sq(n_comp);
  for (std::size_t i = 0; i < n_comp; ++i) sq[i] = std::get<HingeTerm>(components_[i]).a.squaredNorm();
  auto term = [&](std::size_t i) -> const HingeTerm& { return std::get<HingeTerm>(components_[i]); };

  auto polish = [&]() -> std::optional<Vector> {
    std::vector<std::size_t> free;
    Vector base = z;
    for (std::size_t i = 0; i < n_comp; ++i) {
      if (alpha[i] >= 1.0) base += (term(i).label / (kappa * n)) * term(i).a;
      else if (alpha[i] > 0.0) free.push_back(i);
    }
    Vector xs = base;
    std::vector<double> a_free(free.size());
    if (!free.empty()) {
      const Index k = static_cast<Index>(free.size());
      Matrix G(k, k);
      Vector rhs(k);
      for (Index r = 0; r < k; ++r) {
        const HingeTerm& hr = term(free[r]);
        rhs[r] = 1.0 - hr.label * hr.a.dot(base);
        for (Index s = 0; s < k; ++s) {
          const HingeTerm& hs = term(free[s]);
          G(r, s) = hr.label * hs.label * hr.a.dot(hs.a) / (kappa * n);
        }
      }
      const Vector sol = G.completeOrthogonalDecomposition().solve(rhs);
      for (Index r = 0; r < k; ++r) {
        a_free[r] = sol[r];
        if (sol[r] < -1e-12 || sol[r] > 1.0 + 1e-12) return std::nullopt;
        xs += (sol[r] * term(free[r]).label / (kappa * n)) * term(free[r]).a;
      }
    }
    std::size_t f = 0;
    for (std::size_t i = 0; i < n_comp; ++i) {
      const double margin = term(i).label * term(i).a.dot(xs);
      const double tol = 1e-11 * std::max(1.0, std::abs(margin));
      if (f < free.size() && free[f] == i) {
        if (std::abs(margin - 1.0) > tol) return std::nullopt;
        ++f;
      } else if (alpha[i] >= 1.0 ? margin > 1.0 + tol : margin < 1.0 - tol) {
        return std::nullopt;
      }
    }
    return xs;
  };

  constexpr int kMaxEpochs = 100000;
  for (int epoch = 1; epoch <= kMaxEpochs; ++epoch) {
    double largest = 0.0;
    for (std::size_t i = 0; i < n_comp; ++i) {
      if (sq[i] == 0.0) continue;
      const HingeTerm& h = term(i);
      const double margin = h.label * h.a.dot(x);
      const double next = std::clamp(alpha[i] + (1.0 - margin) * kappa * n / sq[i], 0.0, 1.0);
      const double step = next - alpha[i];
      if (step != 0.0) {
        x += (step * h.label / (kappa * n)) * h.a;
        alpha[i] = next;
        largest = std::max(largest, std::abs(step));
      }
    }
    if (largest <= 1e-15) return x;
    if (epoch % 20 == 0 && largest <= 1e-6) {
      if (auto xs = polish()) return xs;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

AdditiveNoiseModel::AdditiveNoiseModel(std::shared_ptr<const ConvexObjective> base, NoiseKind kind,
                                       double sigma)
    : base_(std::move(base)), kind_(kind), sigma_(sigma) {
  if (!base_) throw ConfigError("AdditiveNoiseModel: base objective is null");
  if (sigma_ < 0.0) throw ConfigError("AdditiveNoiseModel: sigma must be nonnegative");
  if (kind_ == NoiseKind::none) sigma_ = 0.0;
}

std::string AdditiveNoiseModel::name() const {
  return "additive-" + to_string(kind_) + "(" + base_->name() + ")";
}

SubgradientSample AdditiveNoiseModel::sample(const Vector& x, CounterRng& rng) const {
  SubgradientSample s{base_->value(x), base_->subgradient(x)};
  if (sigma_ == 0.0 || kind_ == NoiseKind::none) return s;
  const double d = static_cast<double>(x.size());
  if (kind_ == NoiseKind::gaussian) {
    std::normal_distribution<double> noise(0.0, sigma_ / std::sqrt(d));
    for (Index i = 0; i < x.size(); ++i) s.subgradient[i] += noise(rng);
  } else {
    const double half_width = sigma_ * std::sqrt(3.0 / d);
    std::uniform_real_distribution<double> noise(-half_width, half_width);
    for (Index i = 0; i < x.size(); ++i) s.subgradient[i] += noise(rng);
  }
  return s;
}

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "none") return NoiseKind::none;
  if (text == "gaussian") return NoiseKind::gaussian;
  if (text == "uniform") return NoiseKind::uniform;
  throw ConfigError("unknown noise kind '" + text + "' (expected none, gaussian, uniform)");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none:
      return "none";
    case NoiseKind::gaussian:
      return "gaussian";
    case NoiseKind::uniform:
      return "uniform";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

StochasticOracle::StochasticOracle(std::shared_ptr<const StochasticModel> model,
                                   std::uint64_t seed, std::uint64_t stream)
    : model_(std::move(model)), seed_(seed), stream_(stream) {
  if (!model_) throw ConfigError("StochasticOracle: model is null");
}

NoiseSample StochasticOracle::sample_subgradient(const Vector& x) {
  CounterRng rng(seed_, stream_, calls_++);
  SubgradientSample s = model_->sample(x, rng);
  NoiseSample out;
  out.value = s.value;
  if (model_->has_exact_expectation()) out.delta = s.subgradient - model_->subgradient(x);
  out.g = std::move(s.subgradient);
  return out;
}

AssumptionReport validate_assumptions(const StochasticModel& model, const FeasibleSet& X,
                                      const ProblemConstants& declared, std::size_t n_samples,
                                      std::uint64_t seed, std::size_t n_points) {
  if (n_samples < 1000) throw ConfigError("validate_assumptions: n_samples must be >= 1000");
  if (n_points < 1) throw ConfigError("validate_assumptions: n_points must be >= 1");
  const Index d = model.dim();

  AssumptionReport report;
  report.n_samples = n_samples;
  report.n_points = n_points;
  report.declared_M2 = declared.M * declared.M;
  report.declared_sigma2 = declared.sigma * declared.sigma;

  auto shared = std::shared_ptr<const StochasticModel>(&model, [](const StochasticModel*) {});
  const double scale = std::isfinite(diameter(X)) ? 0.5 * diameter(X) : 1.0;
  Vector center = Vector::Zero(d);
  if (const auto* box = std::get_if<Box>(&X)) center = 0.5 * (box->lower + box->upper);

  for (std::size_t p = 0; p < n_points; ++p) {
    Vector x = center;
    if (p > 0) {
      CounterRng point_rng(seed, streams::kProbes, p);
      x = sample_point(X, d, point_rng, center, scale);
    }
    StochasticOracle oracle(shared, seed, p);
    double m2 = 0.0, m2_sq = 0.0, v2 = 0.0, v2_sq = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      const NoiseSample ns = oracle.sample_subgradient(x);
      const double g2 = ns.g.squaredNorm();
      report.max_norm = std::max(report.max_norm, std::sqrt(g2));
      m2 += g2;
      m2_sq += g2 * g2;
      if (ns.delta) {
        const double e2 = ns.delta->squaredNorm();
        v2 += e2;
        v2_sq += e2 * e2;
      }
    }
    const double n = static_cast<double>(n_samples);
    auto estimate = [n](double sum, double sum_sq) {
      const double mean = sum / n;
      const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
      return MomentEstimate{mean, 1.96 * std::sqrt(var / n)};
    };
    const MomentEstimate em = estimate(m2, m2_sq);
    const MomentEstimate ev = estimate(v2, v2_sq);
    if (p == 0 || em.mean > report.second_moment.mean) report.second_moment = em;
    if (p == 0 || ev.mean > report.variance.mean) report.variance = ev;
  }
  report.M_violated = report.second_moment.mean - report.second_moment.radius > report.declared_M2;
  report.sigma_violated = report.variance.mean - report.variance.radius > report.declared_sigma2;
  return report;
}

}  // namespace sadmm
