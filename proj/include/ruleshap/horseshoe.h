#ifndef RULESHAP_HORSESHOE_H_
#define RULESHAP_HORSESHOE_H_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ruleshap/stats.h"

namespace ruleshap {

// Inputs to the split-shrinkage horseshoe regression
//   y ~ N(X_R a + X_L b, sigma^2 I)
//   a_k ~ N(0, lambda_k^2 A_k^2 tau_R^2 tau^2 sigma^2)
//   b_j ~ N(0, gamma_j^2 s^2 tau_L^2 tau^2 sigma^2)
// with half-Cauchy(0, 1) lambda, gamma, tau, tau_L, tau_R and p(sigma^2) ~
// 1/sigma^2. The rule columns are centered inside the sampler, which is the
// flat-intercept treatment of the model intercept.
struct DesignMatrices {
  Eigen::MatrixXd rules;           // n x q, entries in {0, 1}
  Eigen::MatrixXd linear;          // n x p, centered columns
  Eigen::VectorXd y;               // centered outcome
  std::vector<double> rule_scales; // A_1..A_q

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t q() const { return static_cast<std::size_t>(rules.cols()); }
  std::size_t p() const { return static_cast<std::size_t>(linear.cols()); }
  void Validate() const;
};

enum class CoefficientRoute {
  kAuto,       // Cholesky when P <= n, auxiliary-data otherwise
  kCholesky,   // factor X'X + Lambda^-1, O(P^3)
  kAuxiliary,  // Bhattacharya et al. data augmentation, O(n^2 P)
};

struct GibbsConfig {
  std::size_t total_iters = 22000;
  std::size_t burn_in = 2000;
  std::uint64_t seed = 1;
  // Multiplier s on the half-Cauchy scale of the linear-term local shrinkage.
  double linear_scale = 1.0;
  // Floor on inverse-gamma rates and prior variances.
  double floor = 1e-300;
  CoefficientRoute route = CoefficientRoute::kAuto;

  void Validate() const;
};

struct GibbsState {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  double sigma2 = 1.0;
  double tau2 = 1.0;
  double tau_l2 = 1.0;
  double tau_r2 = 1.0;
  Eigen::VectorXd lambda2;
  Eigen::VectorXd gamma2;
  Eigen::VectorXd eta;  // auxiliaries of lambda2
  Eigen::VectorXd nu;   // auxiliaries of gamma2
  double xi = 1.0;
  double xi_l = 1.0;
  double xi_r = 1.0;
};

struct PosteriorDraws {
  Eigen::MatrixXd a;  // retained x q
  Eigen::MatrixXd b;  // retained x p
  std::vector<double> sigma2;
  std::vector<double> tau;
  std::vector<double> tau_l;
  std::vector<double> tau_r;
  std::size_t total_iters = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;

  std::size_t retained() const { return sigma2.size(); }
  std::size_t q() const { return static_cast<std::size_t>(a.cols()); }
  std::size_t p() const { return static_cast<std::size_t>(b.cols()); }
};

struct InverseGammaParams {
  double shape = 1.0;
  double rate = 1.0;
  // Infinite when shape <= 1.
  double Mean() const;
  double Draw(Rng& rng) const { return SampleInverseGamma(shape, rate, rng); }
};

// Full conditionals of the Gibbs scheme. Each returns the inverse-gamma
// parameters given the current values of everything else.
namespace conditionals {

// lambda_k^2 | .
InverseGammaParams RuleLocal(double a_k, double scale_k, double eta_k,
                             double tau2, double tau_r2, double sigma2);
// gamma_j^2 | .
InverseGammaParams LinearLocal(double b_j, double scale_j, double nu_j,
                               double tau2, double tau_l2, double sigma2);
// Auxiliary of a half-Cauchy(0, 1) scale: IG(1, 1 + 1/v).
InverseGammaParams Auxiliary(double v);
// tau_R^2 | .
InverseGammaParams RuleGlobal(const Eigen::VectorXd& a,
                              const std::vector<double>& scales,
                              const Eigen::VectorXd& lambda2, double tau2,
                              double sigma2, double xi_r);
// tau_L^2 | .
InverseGammaParams LinearGlobal(const Eigen::VectorXd& b, double scale,
                                const Eigen::VectorXd& gamma2, double tau2,
                                double sigma2, double xi_l);
// tau^2 | .
InverseGammaParams SharedGlobal(const GibbsState& s,
                                const std::vector<double>& scales,
                                double linear_scale);
// sigma^2 | . ; the shape uses the total term count P = q + p.
InverseGammaParams NoiseVariance(const GibbsState& s,
                                 const std::vector<double>& scales,
                                 double linear_scale, double rss,
                                 std::size_t n);

}  // namespace conditionals

// Exact draws from N(Sigma X'y, sigma^2 Sigma), Sigma = (X'X + Lambda^-1)^-1.
class CoefficientSampler {
 public:
  CoefficientSampler(Eigen::MatrixXd x, Eigen::VectorXd y,
                     CoefficientRoute route = CoefficientRoute::kAuto);

  // `prior_var` is the diagonal of Lambda.
  Eigen::VectorXd Draw(const Eigen::VectorXd& prior_var, double sigma2,
                       Rng& rng) const;
  // Sigma X'y.
  Eigen::VectorXd Mean(const Eigen::VectorXd& prior_var) const;

  CoefficientRoute route() const { return route_; }
  const Eigen::MatrixXd& x() const { return x_; }

 private:
  Eigen::VectorXd DrawCholesky(const Eigen::VectorXd& prior_var, double sigma2,
                               Rng& rng) const;
  Eigen::VectorXd DrawAuxiliary(const Eigen::VectorXd& prior_var, double sigma2,
                                Rng& rng) const;

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  CoefficientRoute route_;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  // Reused buffers; a sampler must not be shared across threads.
  mutable Eigen::MatrixXd scaled_;
  mutable Eigen::MatrixXd gram_;
};

// Called after every iteration (including burn-in) with the 0-based index.
using GibbsObserver = std::function<void(std::size_t, const GibbsState&)>;

PosteriorDraws GibbsFit(const DesignMatrices& dm, const GibbsConfig& cfg,
                        const GibbsObserver& observer = {});

struct PosteriorSummary {
  std::vector<IntervalSummary> a;
  std::vector<IntervalSummary> b;
};

PosteriorSummary SummarizePosterior(const PosteriorDraws& draws, double alpha);

// Column means of the coefficient draws.
Eigen::VectorXd PosteriorMeanA(const PosteriorDraws& draws);
Eigen::VectorXd PosteriorMeanB(const PosteriorDraws& draws);

// CSV with columns a_1..a_q, b_1..b_p, sigma2, tau, tau_L, tau_R.
void WriteDrawsCsv(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws ReadDrawsCsv(const std::string& path);

}  // namespace ruleshap

#endif  // RULESHAP_HORSESHOE_H_
