#pragma once

#include <armadillo>
#include <string>
#include <vector>

#include "lrlcm/model.hpp"

namespace lrlcm {

struct ConditionResult {
  bool pass = false;
  std::string detail;
};

/// Pass/fail report for the checkable identifiability conditions. The rank
/// conditions are sufficient, not necessary, so a failed search (C3) is
/// reported as "not found" rather than as a refutation.
struct IdentReport {
  ConditionResult c1, c2, c3, c4, c5, c6, d1, d2;

  bool generic_ok() const {
    return c1.pass && c2.pass && c3.pass && c4.pass && c5.pass && c6.pass &&
           d1.pass;
  }
  bool strict_ok() const { return generic_ok() && d2.pass; }
  std::string to_text() const;
};

/// Evaluate C1-C6 and D1-D2 for the given parameters and stacked per-time
/// design matrices W^t (each N x (D + H_otr), covariates in the leading D
/// columns). Ranks are numeric with relative tolerance 1e-8. `points`
/// controls the rectangle-probability rule used for the transition matrices.
IdentReport check_identifiability(const MeasurementParams& theta_m,
                                  const StructuralParams& theta_s,
                                  const std::vector<arma::mat>& W_per_time,
                                  const ModelSpec& spec,
                                  std::size_t points = 1024);

/// Numeric rank at relative tolerance 1e-8 times the largest singular value.
arma::uword numeric_rank(const arma::mat& m);

/// W^t matrices assembled from a dataset and a latent-state array
/// (N x T x K): W_n^t = (X_n^t, d_otr(alpha_n^{t-1})), zero block at t = 1.
std::vector<arma::mat> build_design_per_time(const Dataset& data,
                                             const arma::icube& alpha,
                                             const ModelSpec& spec);

}  // namespace lrlcm
