#include "ruleshap/horseshoe.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ruleshap/error.h"

namespace ruleshap {

void DesignMatrices::Validate() const {
  const auto rows = y.size();
  if (rules.rows() != rows && rules.cols() > 0) {
    throw ValidationError("rule design has wrong row count");
  }
  if (linear.rows() != rows && linear.cols() > 0) {
    throw ValidationError("linear design has wrong row count");
  }
  if (rules.cols() + linear.cols() < 1) {
    throw ValidationError("design needs at least one term");
  }
  if (rule_scales.size() != q()) {
    throw ValidationError("need one shrinkage scale per rule");
  }
  for (double s : rule_scales) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw ValidationError("rule scales must be positive and finite");
    }
  }
  for (Eigen::Index k = 0; k < rules.size(); ++k) {
    const double v = rules.data()[k];
    if (v != 0.0 && v != 1.0) throw ValidationError("rule design must be 0/1");
  }
  for (Eigen::Index j = 0; j < linear.cols(); ++j) {
    if (std::abs(linear.col(j).mean()) > 1e-10) {
      throw ValidationError("linear design columns must be centered");
    }
  }
  if (!y.allFinite() || !linear.allFinite()) {
    throw ValidationError("design contains non-finite values");
  }
}

void GibbsConfig::Validate() const {
  if (!(total_iters > burn_in)) {
    throw ValidationError("total iterations must exceed burn-in");
  }
  if (!(linear_scale > 0.0) || !std::isfinite(linear_scale)) {
    throw ValidationError("linear scale multiplier must be positive");
  }
}

double InverseGammaParams::Mean() const {
  if (shape <= 1.0) return std::numeric_limits<double>::infinity();
  return rate / (shape - 1.0);
}

namespace conditionals {

InverseGammaParams RuleLocal(double a_k, double scale_k, double eta_k,
                             double tau2, double tau_r2, double sigma2) {
  return {1.0, 1.0 / eta_k +
                   a_k * a_k / (2.0 * scale_k * scale_k * tau2 * tau_r2 * sigma2)};
}

InverseGammaParams LinearLocal(double b_j, double scale_j, double nu_j,
                               double tau2, double tau_l2, double sigma2) {
  return {1.0, 1.0 / nu_j +
                   b_j * b_j / (2.0 * scale_j * scale_j * tau2 * tau_l2 * sigma2)};
}

InverseGammaParams Auxiliary(double v) { return {1.0, 1.0 + 1.0 / v}; }

InverseGammaParams RuleGlobal(const Eigen::VectorXd& a,
                              const std::vector<double>& scales,
                              const Eigen::VectorXd& lambda2, double tau2,
                              double sigma2, double xi_r) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    sum += a[k] * a[k] / (2.0 * scales[k] * scales[k] * tau2 * lambda2[k] * sigma2);
  }
  return {(static_cast<double>(a.size()) + 1.0) / 2.0, 1.0 / xi_r + sum};
}

InverseGammaParams LinearGlobal(const Eigen::VectorXd& b, double scale,
                                const Eigen::VectorXd& gamma2, double tau2,
                                double sigma2, double xi_l) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    sum += b[j] * b[j] / (2.0 * scale * scale * tau2 * gamma2[j] * sigma2);
  }
  return {(static_cast<double>(b.size()) + 1.0) / 2.0, 1.0 / xi_l + sum};
}

namespace {

// sum_k a_k^2 / (A_k^2 lambda_k^2) and sum_j b_j^2 / (s^2 gamma_j^2).
std::pair<double, double> ScaledSquares(const GibbsState& s,
                                        const std::vector<double>& scales,
                                        double linear_scale) {
  double rules = 0.0;
  for (Eigen::Index k = 0; k < s.a.size(); ++k) {
    rules += s.a[k] * s.a[k] / (scales[k] * scales[k] * s.lambda2[k]);
  }
  double linear = 0.0;
  for (Eigen::Index j = 0; j < s.b.size(); ++j) {
    linear += s.b[j] * s.b[j] / (linear_scale * linear_scale * s.gamma2[j]);
  }
  return {rules, linear};
}

}  // namespace

InverseGammaParams SharedGlobal(const GibbsState& s,
                                const std::vector<double>& scales,
                                double linear_scale) {
  const auto [rules, linear] = ScaledSquares(s, scales, linear_scale);
  const double terms = static_cast<double>(s.a.size() + s.b.size());
  return {(terms + 1.0) / 2.0,
          1.0 / s.xi + rules / (2.0 * s.tau_r2 * s.sigma2) +
              linear / (2.0 * s.tau_l2 * s.sigma2)};
}

InverseGammaParams NoiseVariance(const GibbsState& s,
                                 const std::vector<double>& scales,
                                 double linear_scale, double rss,
                                 std::size_t n) {
  const auto [rules, linear] = ScaledSquares(s, scales, linear_scale);
  const double terms = static_cast<double>(s.a.size() + s.b.size());
  return {(static_cast<double>(n) + terms) / 2.0,
          rss / 2.0 + rules / (2.0 * s.tau2 * s.tau_r2) +
              linear / (2.0 * s.tau2 * s.tau_l2)};
}

}  // namespace conditionals

// --- Coefficient sampler ---------------------------------------------------

CoefficientSampler::CoefficientSampler(Eigen::MatrixXd x, Eigen::VectorXd y,
                                       CoefficientRoute route)
    : x_(std::move(x)), y_(std::move(y)), route_(route) {
  if (route_ == CoefficientRoute::kAuto) {
    route_ = x_.cols() <= x_.rows() ? CoefficientRoute::kCholesky
                                    : CoefficientRoute::kAuxiliary;
  }
  xty_ = x_.transpose() * y_;
  if (route_ == CoefficientRoute::kCholesky) {
    xtx_ = Eigen::MatrixXd::Zero(x_.cols(), x_.cols());
    xtx_.selfadjointView<Eigen::Lower>().rankUpdate(x_.transpose());
    xtx_ = xtx_.selfadjointView<Eigen::Lower>();
  }
}

namespace {

Eigen::VectorXd StandardNormals(Eigen::Index size, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(size);
  for (Eigen::Index i = 0; i < size; ++i) z[i] = normal(rng);
  return z;
}

// LLT with one jittered retry.
// Only the lower triangle of `m` is read.
Eigen::LLT<Eigen::MatrixXd> FactorWithJitter(const Eigen::MatrixXd& lower) {
  Eigen::LLT<Eigen::MatrixXd> llt(lower);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd m = lower;
  const double jitter =
      1e-10 * std::max(1.0, m.diagonal().cwiseAbs().mean());
  m.diagonal().array() += jitter;
  llt.compute(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError("coefficient covariance is singular after jitter");
  }
  return llt;
}

}  // namespace

Eigen::VectorXd CoefficientSampler::Draw(const Eigen::VectorXd& prior_var,
                                         double sigma2, Rng& rng) const {
  if (route_ == CoefficientRoute::kCholesky) {
    return DrawCholesky(prior_var, sigma2, rng);
  }
  return DrawAuxiliary(prior_var, sigma2, rng);
}

Eigen::VectorXd CoefficientSampler::DrawCholesky(
    const Eigen::VectorXd& prior_var, double sigma2, Rng& rng) const {
  Eigen::MatrixXd precision = xtx_;
  precision.diagonal() += prior_var.cwiseInverse();
  const auto llt = FactorWithJitter(std::move(precision));
  Eigen::VectorXd mean = llt.solve(xty_);
  Eigen::VectorXd z = StandardNormals(mean.size(), rng);
  // L^T w = z gives Cov(w) = (L L^T)^-1.
  llt.matrixU().solveInPlace(z);
  return mean + std::sqrt(sigma2) * z;
}

Eigen::VectorXd CoefficientSampler::DrawAuxiliary(
    const Eigen::VectorXd& prior_var, double sigma2, Rng& rng) const {
  // theta ~ N(Sigma X' alpha, Sigma) with alpha = y / sigma; beta = sigma theta.
  const double sigma = std::sqrt(sigma2);
  const Eigen::Index n = x_.rows();
  Eigen::VectorXd u = prior_var.cwiseSqrt().cwiseProduct(
      StandardNormals(prior_var.size(), rng));
  const Eigen::VectorXd delta = StandardNormals(n, rng);
  const Eigen::VectorXd v = x_ * u + delta;

  scaled_.noalias() = x_ * prior_var.cwiseSqrt().asDiagonal();
  gram_.setIdentity(n, n);
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(scaled_);
  const auto llt = FactorWithJitter(gram_);
  const Eigen::VectorXd w = llt.solve(y_ / sigma - v);
  u += prior_var.cwiseProduct(x_.transpose() * w);
  return sigma * u;
}

Eigen::VectorXd CoefficientSampler::Mean(const Eigen::VectorXd& prior_var) const {
  Eigen::MatrixXd precision = x_.transpose() * x_;
  precision.diagonal() += prior_var.cwiseInverse();
  return FactorWithJitter(std::move(precision)).solve(xty_);
}

// --- Gibbs sampler ---------------------------------------------------------

namespace {

bool PositiveFinite(double v) { return v > 0.0 && std::isfinite(v); }

bool PositiveFinite(const Eigen::VectorXd& v) {
  return v.allFinite() && (v.size() == 0 || v.minCoeff() > 0.0);
}

void CheckState(std::size_t iter, const GibbsState& s) {
  if (!s.a.allFinite() || !s.b.allFinite()) {
    throw ChainDivergenceError(iter, "non-finite coefficient draw");
  }
  const bool ok = PositiveFinite(s.sigma2) && PositiveFinite(s.tau2) &&
                  PositiveFinite(s.tau_l2) && PositiveFinite(s.tau_r2) &&
                  PositiveFinite(s.xi) && PositiveFinite(s.xi_l) &&
                  PositiveFinite(s.xi_r) && PositiveFinite(s.lambda2) &&
                  PositiveFinite(s.gamma2) && PositiveFinite(s.eta) &&
                  PositiveFinite(s.nu);
  if (!ok) throw ChainDivergenceError(iter, "non-finite or non-positive variance");
}

}  // namespace

PosteriorDraws GibbsFit(const DesignMatrices& dm, const GibbsConfig& cfg,
                        const GibbsObserver& observer) {
  dm.Validate();
  cfg.Validate();
  const std::size_t n = dm.n();
  const std::size_t q = dm.q();
  const std::size_t p = dm.p();
  const Eigen::Index total = static_cast<Eigen::Index>(q + p);

  Eigen::MatrixXd x(n, total);
  if (q > 0) {
    x.leftCols(q) = dm.rules.rowwise() - dm.rules.colwise().mean();
  }
  if (p > 0) {
    x.rightCols(p) = dm.linear.rowwise() - dm.linear.colwise().mean();
  }
  const Eigen::VectorXd y =
      dm.y.array() - dm.y.mean();
  const CoefficientSampler sampler(x, y, cfg.route);

  GibbsState s;
  s.a = Eigen::VectorXd::Zero(q);
  s.b = Eigen::VectorXd::Zero(p);
  s.lambda2 = Eigen::VectorXd::Ones(q);
  s.eta = Eigen::VectorXd::Ones(q);
  s.gamma2 = Eigen::VectorXd::Ones(p);
  s.nu = Eigen::VectorXd::Ones(p);
  const double var_y =
      n > 1 ? y.squaredNorm() / static_cast<double>(n - 1) : 0.0;
  s.sigma2 = var_y > 0.0 ? var_y : 1.0;

  const double floor = cfg.floor;
  const double ls2 = cfg.linear_scale * cfg.linear_scale;
  auto draw = [&](InverseGammaParams ig, Rng& rng) {
    ig.rate = std::max(ig.rate, floor);
    return ig.Draw(rng);
  };

  PosteriorDraws out;
  out.total_iters = cfg.total_iters;
  out.burn_in = cfg.burn_in;
  out.seed = cfg.seed;
  const std::size_t keep = cfg.total_iters - cfg.burn_in;
  out.a.resize(static_cast<Eigen::Index>(keep), static_cast<Eigen::Index>(q));
  out.b.resize(static_cast<Eigen::Index>(keep), static_cast<Eigen::Index>(p));
  out.sigma2.reserve(keep);
  out.tau.reserve(keep);
  out.tau_l.reserve(keep);
  out.tau_r.reserve(keep);

  Rng rng(cfg.seed);
  Eigen::VectorXd prior_var(total);
  for (std::size_t iter = 0; iter < cfg.total_iters; ++iter) {
    for (std::size_t k = 0; k < q; ++k) {
      prior_var[static_cast<Eigen::Index>(k)] =
          s.tau2 * s.tau_r2 * s.lambda2[k] * dm.rule_scales[k] * dm.rule_scales[k];
    }
    for (std::size_t j = 0; j < p; ++j) {
      prior_var[static_cast<Eigen::Index>(q + j)] =
          s.tau2 * s.tau_l2 * s.gamma2[j] * ls2;
    }
    prior_var = prior_var.cwiseMax(floor).cwiseMin(1.0 / floor);

    const Eigen::VectorXd beta = sampler.Draw(prior_var, s.sigma2, rng);
    s.a = beta.head(q);
    s.b = beta.tail(p);
    if (!beta.allFinite()) {
      throw ChainDivergenceError(iter, "non-finite coefficient draw");
    }

    for (std::size_t k = 0; k < q; ++k) {
      s.lambda2[k] = draw(conditionals::RuleLocal(s.a[k], dm.rule_scales[k],
                                                  s.eta[k], s.tau2, s.tau_r2,
                                                  s.sigma2),
                          rng);
    }
    for (std::size_t k = 0; k < q; ++k) {
      s.eta[k] = draw(conditionals::Auxiliary(s.lambda2[k]), rng);
    }
    for (std::size_t j = 0; j < p; ++j) {
      s.gamma2[j] = draw(conditionals::LinearLocal(s.b[j], cfg.linear_scale,
                                                   s.nu[j], s.tau2, s.tau_l2,
                                                   s.sigma2),
                         rng);
    }
    for (std::size_t j = 0; j < p; ++j) {
      s.nu[j] = draw(conditionals::Auxiliary(s.gamma2[j]), rng);
    }
    // An empty term group leaves its global scale at its initial value.
    if (q > 0) {
      s.tau_r2 = draw(conditionals::RuleGlobal(s.a, dm.rule_scales, s.lambda2,
                                               s.tau2, s.sigma2, s.xi_r),
                      rng);
      s.xi_r = draw(conditionals::Auxiliary(s.tau_r2), rng);
    }
    if (p > 0) {
      s.tau_l2 = draw(conditionals::LinearGlobal(s.b, cfg.linear_scale, s.gamma2,
                                                 s.tau2, s.sigma2, s.xi_l),
                      rng);
      s.xi_l = draw(conditionals::Auxiliary(s.tau_l2), rng);
    }
    s.tau2 = draw(conditionals::SharedGlobal(s, dm.rule_scales, cfg.linear_scale),
                  rng);
    s.xi = draw(conditionals::Auxiliary(s.tau2), rng);

    const double rss = (y - x * beta).squaredNorm();
    s.sigma2 = std::max(
        draw(conditionals::NoiseVariance(s, dm.rule_scales, cfg.linear_scale,
                                         rss, n),
             rng),
        floor);

    CheckState(iter, s);
    if (observer) observer(iter, s);
    if (iter >= cfg.burn_in) {
      const auto row = static_cast<Eigen::Index>(iter - cfg.burn_in);
      out.a.row(row) = s.a.transpose();
      out.b.row(row) = s.b.transpose();
      out.sigma2.push_back(s.sigma2);
      out.tau.push_back(std::sqrt(s.tau2));
      out.tau_l.push_back(std::sqrt(s.tau_l2));
      out.tau_r.push_back(std::sqrt(s.tau_r2));
    }
  }
  return out;
}

// --- Summaries and export --------------------------------------------------

PosteriorSummary SummarizePosterior(const PosteriorDraws& draws, double alpha) {
  if (draws.retained() < 2) {
    throw ValidationError("posterior summary needs at least 2 retained draws");
  }
  PosteriorSummary out;
  auto summarize_cols = [&](const Eigen::MatrixXd& m) {
    std::vector<IntervalSummary> res;
    std::vector<double> col(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) col[i] = m(i, j);
      res.push_back(Summarize(col, alpha));
    }
    return res;
  };
  out.a = summarize_cols(draws.a);
  out.b = summarize_cols(draws.b);
  return out;
}

Eigen::VectorXd PosteriorMeanA(const PosteriorDraws& draws) {
  if (draws.a.rows() == 0) return Eigen::VectorXd::Zero(draws.a.cols());
  return draws.a.colwise().mean().transpose();
}

Eigen::VectorXd PosteriorMeanB(const PosteriorDraws& draws) {
  if (draws.b.rows() == 0) return Eigen::VectorXd::Zero(draws.b.cols());
  return draws.b.colwise().mean().transpose();
}

void WriteDrawsCsv(const PosteriorDraws& draws, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  for (std::size_t k = 0; k < draws.q(); ++k) out << "a_" << k + 1 << ',';
  for (std::size_t j = 0; j < draws.p(); ++j) out << "b_" << j + 1 << ',';
  out << "sigma2,tau,tau_L,tau_R\n";
  char buf[32];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << sep;
  };
  for (std::size_t i = 0; i < draws.retained(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < draws.a.cols(); ++k) put(draws.a(r, k), ',');
    for (Eigen::Index j = 0; j < draws.b.cols(); ++j) put(draws.b(r, j), ',');
    put(draws.sigma2[i], ',');
    put(draws.tau[i], ',');
    put(draws.tau_l[i], ',');
    put(draws.tau_r[i], '\n');
  }
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

PosteriorDraws ReadDrawsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "' is empty");
  std::size_t q = 0;
  std::size_t p = 0;
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.rfind("a_", 0) == 0) ++q;
      else if (name.rfind("b_", 0) == 0) ++p;
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != q + p + 4) {
      throw ParseError(rows.size() + 1, "unexpected draw column count");
    }
    rows.push_back(std::move(vals));
  }
  PosteriorDraws d;
  const auto m = static_cast<Eigen::Index>(rows.size());
  d.a.resize(m, static_cast<Eigen::Index>(q));
  d.b.resize(m, static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < q; ++k) d.a(i, static_cast<Eigen::Index>(k)) = r[k];
    for (std::size_t j = 0; j < p; ++j) d.b(i, static_cast<Eigen::Index>(j)) = r[q + j];
    d.sigma2.push_back(r[q + p]);
    d.tau.push_back(r[q + p + 1]);
    d.tau_l.push_back(r[q + p + 2]);
    d.tau_r.push_back(r[q + p + 3]);
  }
  return d;
}

}  // namespace ruleshap
