#pragma once

#include <armadillo>
#include <string>
#include <vector>

#include "lrlcm/model.hpp"
#include "lrlcm/sampler.hpp"

namespace lrlcm {

/// Conditional log-likelihood of one respondent's observed rows:
/// sum over (t, j) of log[Phi(kappa_{y+1} - d beta_j) - Phi(kappa_y - d beta_j)].
/// Masked time points are skipped. Returns -inf if a cell has zero mass.
double conditional_loglik(const arma::imat& y_n, const arma::uvec& mask_n,
                          const arma::imat& alpha_n, const arma::mat& beta,
                          const std::vector<arma::vec>& kappa,
                          const ModelSpec& spec);

struct WaicResult {
  double waic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
};

/// WAIC from an S x N matrix of conditional log-likelihood draws:
/// lppd by log-sum-exp, p_waic as the pointwise unbiased variance,
/// waic = -2 (lppd - p_waic). S = 1 yields p_waic = 0.
WaicResult waic(const arma::mat& loglik);

/// Geweke two-window mean-equality z score with spectral long-run variance
/// (Bartlett lag window, bandwidth floor(sqrt(window length))).
/// Windows are the first frac_a and last frac_b of the series and must not
/// overlap. The series must have at least 100 points and be non-constant.
double geweke_z(const arma::vec& series, double frac_a = 0.1,
                double frac_b = 0.5);

/// Integrated autocorrelation time by Geyer's initial positive sequence;
/// ess(series) = length / iact.
double iact(const arma::vec& series);
double ess(const arma::vec& series);

// ---------------------------------------------------------------------------
// Chain summaries
// ---------------------------------------------------------------------------

struct ParamSummary {
  std::string name;
  arma::vec mean;    // flattened, column-major in the natural shape
  arma::vec lo, hi;  // equal-tail credible interval bounds
  arma::uvec zero_in_ci;  // the applications' sparsity flag per coefficient
};

struct ChainSummary {
  ParamSummary beta, gamma, lambda, xi, R, eta;
  arma::vec delta_mean;   // posterior activation frequency per coefficient
  arma::uvec delta_mode;  // I(mean > 0.5)
  double level = 0.95;
};

/// Posterior means, the delta posterior mode, equal-tail credible intervals
/// (type-7 interpolated quantiles), and the class-conditional response
/// probability table eta recomputed per draw from (beta, kappa).
ChainSummary summarize_chain(const Chain& chain, double level = 0.95);

/// Type-7 interpolated quantile of a sample.
double quantile_type7(arma::vec sorted_values, double p);

/// Class-conditional response probability table for one draw (the emissions
/// matrix of that draw's measurement parameters).
arma::mat eta_of_draw(const Chain& chain, int s);

}  // namespace lrlcm
