#pragma once

#include <armadillo>
#include <cstddef>

#include "lrlcm/rng.hpp"

namespace lrlcm {

// ---------------------------------------------------------------------------
// Scalar normal kernels
// ---------------------------------------------------------------------------

/// Standard normal cdf. NaN input is an error.
double normal_cdf(double x);

/// log Phi(x), stable into the far lower tail (x << -37 where the cdf
/// underflows double precision).
double log_normal_cdf(double x);

/// Standard normal quantile (Wichura's PPND16). p must lie in (0, 1).
double normal_quantile(double p);

/// log(Phi(b) - Phi(a)) for a < b, computed without catastrophic
/// cancellation when both endpoints sit in the same tail.
double log_normal_cdf_interval(double a, double b);

/// log(1 - exp(z)) for z < 0.
double log1mexp(double z);

// ---------------------------------------------------------------------------
// Scalar samplers
// ---------------------------------------------------------------------------

double sample_normal(RngStream& rng);

/// Truncated normal on (lo, hi]; either bound may be infinite.
/// Inverse-cdf in the central region, exponential rejection once the
/// standardized window is beyond |5| (the Gibbs steps routinely request
/// narrow tail windows, where the inverse cdf loses all precision).
double sample_truncated_normal(double mu, double var, double lo, double hi,
                               RngStream& rng);

/// Exponential with given rate restricted to (lo, hi); lo must be finite,
/// hi may be infinite.
double sample_trunc_exponential(double rate, double lo, double hi,
                                RngStream& rng);

double sample_gamma(double shape, RngStream& rng);  // scale 1
double sample_chisq(double dof, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);

/// Index drawn proportionally to `weights` (not necessarily normalized).
/// At least one weight must be positive and none may be negative.
std::size_t sample_categorical(const arma::vec& weights, RngStream& rng);

// ---------------------------------------------------------------------------
// Matrix-variate kernels
// ---------------------------------------------------------------------------

/// Cholesky-based positive definiteness check: factorization failure is the
/// definition of "not PD" here, no eigenvalue thresholding.
bool is_positive_definite(const arma::mat& m);

/// Lower Cholesky factor; throws if the matrix is not symmetric PD.
arma::mat chol_lower(const arma::mat& m, const char* what);

/// Inverse Wishart draw via Bartlett decomposition of the Wishart of the
/// inverse scale. Requires dof > K - 1 and a PD scale.
arma::mat sample_inverse_wishart(const arma::mat& scale, double dof,
                                 RngStream& rng);

/// Matrix-variate normal: mean p x n, row covariance p x p, column
/// covariance n x n, so vec(X') has covariance row_cov (x) col_cov.
arma::mat sample_matrix_normal(const arma::mat& mean, const arma::mat& row_cov,
                               const arma::mat& col_cov, RngStream& rng);

/// P(lower < Z <= upper) for Z ~ N(mean, corr), corr a correlation matrix.
/// Separation-of-variables quasi Monte Carlo with a fixed Richtmyer rule and
/// fixed shift, so the result is deterministic for a given configuration.
double mvn_rect_prob(const arma::vec& mean, const arma::mat& corr,
                     const arma::vec& lower, const arma::vec& upper,
                     std::size_t points = 4096);

}  // namespace lrlcm
