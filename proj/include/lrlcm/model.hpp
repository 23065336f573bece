#pragma once

#include <armadillo>
#include <cstddef>
#include <vector>

namespace lrlcm {

/// Model dimensions plus everything derived from the cumulative design
/// coding: reduced design columns for the measurement and transition models,
/// the full per-class design matrices, and the comparable-pair structure
/// used by the monotonicity checks.
///
/// Column convention: a design column is identified by a multi-index
/// (m_1, ..., m_K) with m_k in {0, ..., L-1}; the column value at profile
/// alpha is prod_k I(alpha_k >= m_k). Columns are kept when at most `order`
/// entries of the multi-index are nonzero, ordered lexicographically with
/// m_1 most significant, which is exactly the ordering of the full Kronecker
/// product d_1 (x) ... (x) d_K. The first column is always the intercept.
class ModelSpec {
public:
  ModelSpec(int K, int L, std::vector<int> M, int meas_order, int trans_order,
            int D);

  int K() const { return K_; }
  int L() const { return L_; }
  int J() const { return static_cast<int>(M_.size()); }
  int D() const { return D_; }
  const std::vector<int>& M() const { return M_; }
  int meas_order() const { return meas_order_; }
  int trans_order() const { return trans_order_; }

  int H() const { return static_cast<int>(meas_cols_.size()); }
  int H_otr() const { return static_cast<int>(otr_cols_.size()); }
  int n_classes() const { return n_classes_; }
  int total_categories() const { return total_categories_; }

  /// Multi-indices of the retained design columns (measurement model).
  const std::vector<std::vector<int>>& meas_cols() const { return meas_cols_; }
  const std::vector<std::vector<int>>& otr_cols() const { return otr_cols_; }

  /// Interaction order (number of nonzero multi-index entries) per column.
  const std::vector<int>& meas_col_order() const { return meas_col_order_; }

  arma::ivec profile_of_class(int c) const;
  int class_of_profile(const arma::ivec& alpha) const;

  /// Full n_classes x H design matrix for the measurement model; row c is
  /// the design vector of profile c.
  const arma::mat& design_matrix() const { return design_; }
  /// Same for the transition model columns (n_classes x H_otr).
  const arma::mat& design_matrix_otr() const { return design_otr_; }

  /// Comparable pairs u >= v (u != v) as rows of design differences
  /// d_u - d_v over the measurement columns.
  const arma::mat& monotone_pair_diffs() const { return pair_diffs_; }
  /// Indices into monotone_pair_diffs() of the pairs whose column-h design
  /// entry differs; these are the pairs that constrain beta_{hj}.
  const std::vector<std::vector<arma::uword>>& pairs_touching_col() const {
    return pairs_touching_col_;
  }

  /// Identifier for the column-order convention, recorded in chain files.
  static const char* column_convention() {
    return "kronecker-lex-multiindex-v1";
  }

private:
  int K_, L_, meas_order_, trans_order_, D_;
  std::vector<int> M_;
  int n_classes_;
  int total_categories_;
  std::vector<std::vector<int>> meas_cols_, otr_cols_;
  std::vector<int> meas_col_order_;
  arma::mat design_, design_otr_;
  arma::mat pair_diffs_;
  std::vector<std::vector<arma::uword>> pairs_touching_col_;
};

/// Reduced design vector of `alpha` at interaction order `order`; columns as
/// documented on ModelSpec.
arma::rowvec design_vector(const arma::ivec& alpha, const ModelSpec& spec,
                           int order);

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

struct MeasurementParams {
  arma::mat beta;                 // H x J
  std::vector<arma::vec> kappa;   // per item: M_j + 1 thresholds, ends at +-inf
  arma::umat delta;               // H x J activation
  double omega = 0.5;
};

struct StructuralParams {
  arma::mat gamma;   // K x (L+1); gamma(k,0) = -inf, gamma(k,1) = 0, gamma(k,L) = inf
  arma::mat lambda;  // D x K
  arma::mat xi;      // H_otr x K
  arma::mat R;       // K x K correlation
};

/// Expanded-scale twin of the structural block: Sigma = V^1/2 R V^1/2 with
/// gamma, zeta = (lambda', xi')' and alpha* carried on the Sigma scale.
struct ExpandedParams {
  arma::mat Sigma;    // K x K PD
  arma::mat gamma_t;  // K x (L+1), expanded scale
  arma::mat zeta_t;   // (D + H_otr) x K, expanded scale
};

/// De-scale expanded parameters: V = diag(Sigma), R = V^-1/2 Sigma V^-1/2,
/// gamma = gamma~ / sqrt(v_k) per row, zeta = zeta~ V^-1/2.
StructuralParams to_original_scale(const ExpandedParams& exp, int D);

/// Forward transform, the inverse of to_original_scale (round-trips to
/// machine precision).
ExpandedParams to_expanded_scale(const StructuralParams& orig,
                                 const arma::vec& V);

void validate_measurement(const MeasurementParams& m, const ModelSpec& spec);
void validate_structural(const StructuralParams& s, const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

constexpr int kMissing = -1;

struct Dataset {
  arma::icube Y;   // N x T x J; kMissing at masked cells
  arma::cube X;    // N x T x D
  arma::umat mask; // N x T; 1 = whole response row missing

  int N() const { return static_cast<int>(Y.n_rows); }
  int T() const { return static_cast<int>(Y.n_cols); }
  int J() const { return static_cast<int>(Y.n_slices); }
};

void validate_dataset(const Dataset& data, const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Model mathematics
// ---------------------------------------------------------------------------

/// P(Y_j = m | alpha) = Phi(kappa_{m+1} - d beta_j) - Phi(kappa_m - d beta_j).
double emission_prob(int m, const arma::ivec& alpha, const arma::vec& beta_j,
                     const arma::vec& kappa_j, const ModelSpec& spec);

/// (sum_j M_j) x L^K matrix of class-conditional category probabilities;
/// item blocks stacked in item order.
arma::mat emissions_matrix(const MeasurementParams& theta_m,
                           const ModelSpec& spec);

/// Transition (or initial, when alpha_prev is null) probability of alpha_t
/// under the multivariate probit structural model.
double transition_prob(const arma::ivec& alpha_t, const arma::ivec* alpha_prev,
                       const arma::vec& x_t, const StructuralParams& theta_s,
                       const ModelSpec& spec, std::size_t points = 4096);

/// Left truncation point for beta_{hj} given the other components: the
/// largest value of -(d_u - d_v) beta_(h)j over comparable pairs whose
/// column-h entry differs. The intercept is unconstrained (-inf).
double monotone_truncation_point(int h, const arma::vec& beta_j,
                                 const ModelSpec& spec);

/// Exhaustive monotonicity check: d_u beta_j >= d_v beta_j for all u >= v,
/// with a small numerical tolerance.
bool check_monotone(const arma::vec& beta_j, const ModelSpec& spec,
                    double tol = 1e-9);

}  // namespace lrlcm
