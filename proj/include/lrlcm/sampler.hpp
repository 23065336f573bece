#pragma once

#include <armadillo>
#include <cstdint>
#include <string>
#include <vector>

#include "lrlcm/model.hpp"
#include "lrlcm/rng.hpp"

namespace lrlcm {

struct ChainConfig {
  int burn_in = 6000;
  int post_burn_in = 10000;
  int thin = 1;
  double sigma_beta2 = 2.0;
  double omega0 = 0.5;
  double omega1 = 0.5;
  double rate_a = 1.0 / 1000.0;
  double v0 = 0.0;           // <= 0 means the default K + 1
  double sigma_kappa2 = 0.01;  // random-walk variance for threshold proposals
  std::uint64_t seed = 0;

  double v0_or_default(int K) const {
    return v0 > 0.0 ? v0 : static_cast<double>(K + 1);
  }
};

/// Mutable sampler state: expanded-scale structural block, measurement
/// parameters, latent states and both augmented layers, plus the response
/// array with missing cells imputed.
struct ChainState {
  MeasurementParams meas;
  ExpandedParams expa;
  arma::icube alpha;       // N x T x K latent levels
  arma::mat alpha_star;    // (T*N) x K augmented latent, expanded scale; row t*N + n
  arma::cube ystar;        // N x T x J augmented responses
  arma::icube y;           // N x T x J responses with imputations at masked cells
  arma::vec kappa_accepts; // per item
  arma::vec kappa_proposals;
};

/// Retained draws on the original scale, flattened one row per draw in
/// column-major (Armadillo vectorise) order, plus run metadata.
struct Chain {
  // Model and run description (enough to rebuild the ModelSpec).
  int K = 0, L = 0, D = 0, meas_order = 1, trans_order = 1;
  std::vector<int> M;
  int N = 0, T = 0;
  ChainConfig config;
  std::string sweep_order;
  std::string column_convention;

  arma::mat beta;    // S x (H*J)
  arma::mat delta;   // S x (H*J)
  arma::mat kappa;   // S x sum_j (M_j + 1)
  arma::mat gamma;   // S x (K*(L+1))
  arma::mat lambda;  // S x (D*K)
  arma::mat xi;      // S x (H_otr*K)
  arma::mat R;       // S x (K*K)
  arma::vec omega;   // S
  arma::mat loglik;  // S x N conditional log-likelihood rows

  arma::vec kappa_accept_rate;  // per item; NaN where no free thresholds

  int n_draws() const { return static_cast<int>(beta.n_rows); }
  ModelSpec spec() const {
    return ModelSpec(K, L, M, meas_order, trans_order, D);
  }

  // Draw s reshaped back to natural dimensions.
  arma::mat beta_draw(int s) const;
  arma::umat delta_draw(int s) const;
  std::vector<arma::vec> kappa_draw(int s) const;
  arma::mat gamma_draw(int s) const;
  arma::mat lambda_draw(int s) const;
  arma::mat xi_draw(int s) const;
  arma::mat R_draw(int s) const;
};

/// One Metropolis-within-Gibbs chain over a fixed dataset. The individual
/// steps are public so tests can drive them against their oracles.
class MwgSampler {
public:
  MwgSampler(const Dataset& data, const ModelSpec& spec,
             const ChainConfig& config);

  /// Initialize the state (uniform latents, zero coefficients, equally
  /// spaced thresholds, augmented layers from their truncated conditionals);
  /// every state invariant holds afterwards.
  void init();

  void sweep();

  /// Threshold + augmented-response move for item j (Cowles-style joint
  /// Metropolis); returns the accept decision (vacuously true when the item
  /// has no free thresholds).
  bool step_kappa_ystar(int j);
  void step_delta_beta(int j);
  void step_alpha_cell(int n, int t, int k);
  void step_gamma(int k);
  void step_sigma_zeta();
  void step_omega();
  void step_missing_y();

  Chain run();

  const ChainState& state() const { return state_; }
  ChainState& mutable_state() { return state_; }
  const ModelSpec& spec() const { return spec_; }
  RngStream& rng() { return rng_; }

  /// Categorical weights of the collapsed latent-level update at one cell,
  /// normalized; exposed for the enumeration oracle tests.
  arma::vec alpha_cell_weights(int n, int t, int k);

  /// Collapsed activation probability P(delta_hj = 1 | rest); exposed for
  /// the quadrature oracle tests.
  double delta_activation_prob(int h, int j) const;

  /// Conditional log-likelihood of respondent n's observed rows under the
  /// current state.
  double conditional_loglik_row(int n) const;

  void refresh_caches();  // recompute per-sweep caches after external state edits

  static const char* sweep_order_string();

private:
  void refresh_sigma_caches();
  void refresh_predictors();

  const Dataset& data_;
  ModelSpec spec_;
  ChainConfig cfg_;
  RngStream rng_;
  ChainState state_;

  // Per-sweep caches.
  arma::imat class_idx_;    // N x T current latent class per cell
  arma::mat pred_;          // n_classes x J linear predictors D beta
  arma::mat xlam_;          // (T*N) x K covariate part of W zeta~
  arma::mat zotr_;          // n_classes x K transition-design part of W zeta~
  arma::mat sigma_inv_;     // K x K
  arma::vec sigma_cond_var_;   // per k
  arma::mat sigma_cond_coef_;  // (K-1) x K, column k = coefficients for others
};

Chain run_chain(const Dataset& data, const ModelSpec& spec,
                const ChainConfig& config);

}  // namespace lrlcm
