#include "lrlcm/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lrlcm/dist.hpp"

namespace lrlcm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

int checked_pow(int base, int expn) {
  long long v = 1;
  for (int i = 0; i < expn; ++i) {
    v *= base;
    if (v > (1LL << 30)) throw std::invalid_argument("L^K is too large");
  }
  return static_cast<int>(v);
}

std::vector<std::vector<int>> reduced_columns(int K, int L, int order) {
  std::vector<std::vector<int>> cols;
  std::vector<int> m(K, 0);
  // Lexicographic enumeration with m_1 most significant = Kronecker order.
  for (;;) {
    int nz = 0;
    for (int v : m) nz += (v > 0);
    if (nz <= order) cols.push_back(m);
    int k = K - 1;
    while (k >= 0 && m[k] == L - 1) m[k--] = 0;
    if (k < 0) break;
    ++m[k];
  }
  return cols;
}

double design_entry(const arma::ivec& alpha, const std::vector<int>& col) {
  for (std::size_t k = 0; k < col.size(); ++k)
    if (alpha[k] < col[k]) return 0.0;
  return 1.0;
}

}  // namespace

ModelSpec::ModelSpec(int K, int L, std::vector<int> M, int meas_order,
                     int trans_order, int D)
    : K_(K), L_(L), meas_order_(meas_order), trans_order_(trans_order), D_(D),
      M_(std::move(M)) {
  if (K_ < 1) throw std::invalid_argument("ModelSpec: K must be >= 1");
  if (L_ < 2) throw std::invalid_argument("ModelSpec: L must be >= 2");
  if (M_.empty()) throw std::invalid_argument("ModelSpec: need at least one item");
  for (int m : M_)
    if (m < 2) throw std::invalid_argument("ModelSpec: every M_j must be >= 2");
  if (meas_order_ < 1 || meas_order_ > K_)
    throw std::invalid_argument("ModelSpec: meas_order must be in [1, K]");
  if (trans_order_ < 1 || trans_order_ > K_)
    throw std::invalid_argument("ModelSpec: trans_order must be in [1, K]");
  if (D_ < 0) throw std::invalid_argument("ModelSpec: D must be >= 0");

  n_classes_ = checked_pow(L_, K_);
  total_categories_ = 0;
  for (int m : M_) total_categories_ += m;

  meas_cols_ = reduced_columns(K_, L_, meas_order_);
  otr_cols_ = reduced_columns(K_, L_, trans_order_);
  meas_col_order_.resize(meas_cols_.size());
  for (std::size_t h = 0; h < meas_cols_.size(); ++h) {
    int nz = 0;
    for (int v : meas_cols_[h]) nz += (v > 0);
    meas_col_order_[h] = nz;
  }

  design_.set_size(n_classes_, meas_cols_.size());
  design_otr_.set_size(n_classes_, otr_cols_.size());
  for (int c = 0; c < n_classes_; ++c) {
    const arma::ivec alpha = profile_of_class(c);
    for (std::size_t h = 0; h < meas_cols_.size(); ++h)
      design_(c, h) = design_entry(alpha, meas_cols_[h]);
    for (std::size_t h = 0; h < otr_cols_.size(); ++h)
      design_otr_(c, h) = design_entry(alpha, otr_cols_[h]);
  }

  // Comparable pairs u >= v, u != v, enumerated coordinatewise.
  std::vector<std::pair<int, int>> pairs;
  for (int cu = 0; cu < n_classes_; ++cu) {
    const arma::ivec u = profile_of_class(cu);
    for (int cv = 0; cv < n_classes_; ++cv) {
      if (cu == cv) continue;
      const arma::ivec v = profile_of_class(cv);
      bool geq = true;
      for (int k = 0; k < K_; ++k)
        if (u[k] < v[k]) { geq = false; break; }
      if (geq) pairs.emplace_back(cu, cv);
    }
  }
  pair_diffs_.set_size(pairs.size(), meas_cols_.size());
  for (std::size_t p = 0; p < pairs.size(); ++p)
    pair_diffs_.row(p) = design_.row(pairs[p].first) - design_.row(pairs[p].second);
  pairs_touching_col_.resize(meas_cols_.size());
  for (std::size_t h = 0; h < meas_cols_.size(); ++h)
    for (std::size_t p = 0; p < pairs.size(); ++p)
      if (pair_diffs_(p, h) > 0.5) pairs_touching_col_[h].push_back(p);
}

arma::ivec ModelSpec::profile_of_class(int c) const {
  if (c < 0 || c >= n_classes_)
    throw std::invalid_argument("profile_of_class: class index out of range");
  arma::ivec alpha(K_);
  for (int k = K_ - 1; k >= 0; --k) {
    alpha[k] = c % L_;
    c /= L_;
  }
  return alpha;
}

int ModelSpec::class_of_profile(const arma::ivec& alpha) const {
  if (static_cast<int>(alpha.n_elem) != K_)
    throw std::invalid_argument("class_of_profile: profile has wrong length");
  int c = 0;
  for (int k = 0; k < K_; ++k) {
    if (alpha[k] < 0 || alpha[k] >= L_)
      throw std::invalid_argument("class_of_profile: level out of range");
    c = c * L_ + static_cast<int>(alpha[k]);
  }
  return c;
}

arma::rowvec design_vector(const arma::ivec& alpha, const ModelSpec& spec,
                           int order) {
  if (order < 1 || order > spec.K())
    throw std::invalid_argument("design_vector: order must be in [1, K]");
  for (arma::uword k = 0; k < alpha.n_elem; ++k)
    if (alpha[k] < 0 || alpha[k] >= spec.L())
      throw std::invalid_argument("design_vector: profile level out of range");
  const auto cols = (order == spec.meas_order()) ? spec.meas_cols()
                    : (order == spec.trans_order())
                        ? spec.otr_cols()
                        : std::vector<std::vector<int>>{};
  if (!cols.empty()) {
    arma::rowvec d(cols.size());
    for (std::size_t h = 0; h < cols.size(); ++h)
      d[h] = design_entry(alpha, cols[h]);
    return d;
  }
  // Orders other than the two cached ones: enumerate on the fly.
  std::vector<std::vector<int>> fresh;
  {
    std::vector<int> m(spec.K(), 0);
    for (;;) {
      int nz = 0;
      for (int v : m) nz += (v > 0);
      if (nz <= order) fresh.push_back(m);
      int k = spec.K() - 1;
      while (k >= 0 && m[k] == spec.L() - 1) m[k--] = 0;
      if (k < 0) break;
      ++m[k];
    }
  }
  arma::rowvec d(fresh.size());
  for (std::size_t h = 0; h < fresh.size(); ++h)
    d[h] = design_entry(alpha, fresh[h]);
  return d;
}

StructuralParams to_original_scale(const ExpandedParams& exp, int D) {
  const int K = static_cast<int>(exp.Sigma.n_rows);
  if (!is_positive_definite(exp.Sigma))
    throw std::invalid_argument("to_original_scale: Sigma is not PD");
  arma::vec v = exp.Sigma.diag();
  arma::vec vinv_sqrt = 1.0 / arma::sqrt(v);
  StructuralParams out;
  out.R = exp.Sigma;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) out.R(i, j) *= vinv_sqrt[i] * vinv_sqrt[j];
  out.R.diag().ones();
  out.gamma = exp.gamma_t;
  for (int k = 0; k < K; ++k) out.gamma.row(k) *= vinv_sqrt[k];
  // Row scaling leaves the infinities in place; re-pin the fixed entries.
  for (int k = 0; k < K; ++k) {
    out.gamma(k, 0) = -kInf;
    out.gamma(k, 1) = 0.0;
    out.gamma(k, out.gamma.n_cols - 1) = kInf;
  }
  arma::mat zeta = exp.zeta_t;
  for (int k = 0; k < K; ++k) zeta.col(k) *= vinv_sqrt[k];
  if (D > 0)
    out.lambda = zeta.rows(0, D - 1);
  else
    out.lambda.set_size(0, K);
  out.xi = zeta.rows(D, zeta.n_rows - 1);
  return out;
}

ExpandedParams to_expanded_scale(const StructuralParams& orig,
                                 const arma::vec& V) {
  const int K = static_cast<int>(orig.R.n_rows);
  for (double v : V)
    if (!(v > 0.0)) throw std::invalid_argument("to_expanded_scale: V must be positive");
  arma::vec vsqrt = arma::sqrt(V);
  ExpandedParams out;
  out.Sigma = orig.R;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) out.Sigma(i, j) *= vsqrt[i] * vsqrt[j];
  out.gamma_t = orig.gamma;
  for (int k = 0; k < K; ++k) out.gamma_t.row(k) *= vsqrt[k];
  for (int k = 0; k < K; ++k) {
    out.gamma_t(k, 0) = -kInf;
    out.gamma_t(k, out.gamma_t.n_cols - 1) = kInf;
  }
  arma::mat zeta = arma::join_cols(orig.lambda, orig.xi);
  for (int k = 0; k < K; ++k) zeta.col(k) *= vsqrt[k];
  out.zeta_t = zeta;
  return out;
}

void validate_measurement(const MeasurementParams& m, const ModelSpec& spec) {
  const int H = spec.H(), J = spec.J();
  if (static_cast<int>(m.beta.n_rows) != H || static_cast<int>(m.beta.n_cols) != J)
    throw std::invalid_argument("measurement: beta must be H x J");
  if (static_cast<int>(m.delta.n_rows) != H || static_cast<int>(m.delta.n_cols) != J)
    throw std::invalid_argument("measurement: delta must be H x J");
  if (static_cast<int>(m.kappa.size()) != J)
    throw std::invalid_argument("measurement: kappa must have J items");
  if (!(m.omega >= 0.0 && m.omega <= 1.0))
    throw std::invalid_argument("measurement: omega must lie in [0,1]");
  for (int j = 0; j < J; ++j) {
    const arma::vec& k = m.kappa[j];
    const int Mj = spec.M()[j];
    if (static_cast<int>(k.n_elem) != Mj + 1)
      throw std::invalid_argument("measurement: kappa_" + std::to_string(j) +
                                  " must have M_j + 1 entries");
    if (k[0] != -kInf || k[1] != 0.0 || k[Mj] != kInf)
      throw std::invalid_argument("measurement: kappa_" + std::to_string(j) +
                                  " must fix kappa_0 = -inf, kappa_1 = 0, kappa_M = inf");
    for (int l = 0; l < Mj; ++l)
      if (!(k[l] < k[l + 1]))
        throw std::invalid_argument("measurement: kappa_" + std::to_string(j) +
                                    " is not strictly increasing");
    if (m.delta(0, j) != 1)
      throw std::invalid_argument("measurement: intercept delta must be 1");
    for (int h = 0; h < H; ++h)
      if (m.delta(h, j) == 0 && m.beta(h, j) != 0.0)
        throw std::invalid_argument("measurement: beta must vanish where delta = 0");
    if (!check_monotone(m.beta.col(j), spec))
      throw std::invalid_argument("measurement: beta column " + std::to_string(j) +
                                  " violates the monotone region");
  }
}

void validate_structural(const StructuralParams& s, const ModelSpec& spec) {
  const int K = spec.K(), L = spec.L();
  if (static_cast<int>(s.gamma.n_rows) != K ||
      static_cast<int>(s.gamma.n_cols) != L + 1)
    throw std::invalid_argument("structural: gamma must be K x (L+1)");
  for (int k = 0; k < K; ++k) {
    if (s.gamma(k, 0) != -kInf || s.gamma(k, 1) != 0.0 || s.gamma(k, L) != kInf)
      throw std::invalid_argument("structural: gamma row must fix -inf, 0, ..., inf");
    for (int l = 0; l < L; ++l)
      if (!(s.gamma(k, l) < s.gamma(k, l + 1)))
        throw std::invalid_argument("structural: gamma row not strictly increasing");
  }
  if (static_cast<int>(s.lambda.n_rows) != spec.D() ||
      static_cast<int>(s.lambda.n_cols) != K)
    throw std::invalid_argument("structural: lambda must be D x K");
  if (static_cast<int>(s.xi.n_rows) != spec.H_otr() ||
      static_cast<int>(s.xi.n_cols) != K)
    throw std::invalid_argument("structural: xi must be H_otr x K");
  if (static_cast<int>(s.R.n_rows) != K || static_cast<int>(s.R.n_cols) != K)
    throw std::invalid_argument("structural: R must be K x K");
  for (int k = 0; k < K; ++k)
    if (std::fabs(s.R(k, k) - 1.0) > 1e-10)
      throw std::invalid_argument("structural: R must have unit diagonal");
  if (!is_positive_definite(s.R))
    throw std::invalid_argument("structural: R is not positive definite");
}

void validate_dataset(const Dataset& data, const ModelSpec& spec) {
  if (static_cast<int>(data.Y.n_slices) != spec.J())
    throw std::invalid_argument("dataset: Y item count does not match spec");
  if (static_cast<int>(data.X.n_slices) != spec.D())
    throw std::invalid_argument("dataset: X covariate count does not match spec");
  if (data.X.n_rows != data.Y.n_rows || data.X.n_cols != data.Y.n_cols)
    throw std::invalid_argument("dataset: X and Y shapes disagree");
  if (data.mask.n_rows != data.Y.n_rows || data.mask.n_cols != data.Y.n_cols)
    throw std::invalid_argument("dataset: mask shape disagrees with Y");
  for (int n = 0; n < data.N(); ++n)
    for (int t = 0; t < data.T(); ++t)
      for (int j = 0; j < data.J(); ++j) {
        const auto y = data.Y(n, t, j);
        if (data.mask(n, t)) {
          if (y != kMissing)
            throw std::invalid_argument(
                "dataset: masked row has non-missing response at (n=" +
                std::to_string(n) + ", t=" + std::to_string(t) + ")");
        } else if (y < 0 || y >= spec.M()[j]) {
          throw std::invalid_argument(
              "dataset: response out of range at (n=" + std::to_string(n) +
              ", t=" + std::to_string(t) + ", j=" + std::to_string(j) + ")");
        }
      }
}

double emission_prob(int m, const arma::ivec& alpha, const arma::vec& beta_j,
                     const arma::vec& kappa_j, const ModelSpec& spec) {
  const int Mj = static_cast<int>(kappa_j.n_elem) - 1;
  if (m < 0 || m >= Mj)
    throw std::invalid_argument("emission_prob: category out of range");
  for (int l = 0; l < Mj; ++l)
    if (!(kappa_j[l] < kappa_j[l + 1]))
      throw std::invalid_argument("emission_prob: invalid thresholds");
  const double s =
      arma::dot(design_vector(alpha, spec, spec.meas_order()), beta_j);
  return normal_cdf(kappa_j[m + 1] - s) - normal_cdf(kappa_j[m] - s);
}

arma::mat emissions_matrix(const MeasurementParams& theta_m,
                           const ModelSpec& spec) {
  arma::mat B(spec.total_categories(), spec.n_classes());
  const arma::mat& Dmat = spec.design_matrix();
  int row0 = 0;
  for (int j = 0; j < spec.J(); ++j) {
    const int Mj = spec.M()[j];
    const arma::vec& kap = theta_m.kappa[j];
    for (int c = 0; c < spec.n_classes(); ++c) {
      const double s = arma::dot(Dmat.row(c), theta_m.beta.col(j));
      double prev = 0.0;
      for (int m = 0; m < Mj; ++m) {
        const double cur = normal_cdf(kap[m + 1] - s);
        B(row0 + m, c) = cur - prev;
        prev = cur;
      }
    }
    row0 += Mj;
  }
  return B;
}

double transition_prob(const arma::ivec& alpha_t, const arma::ivec* alpha_prev,
                       const arma::vec& x_t, const StructuralParams& theta_s,
                       const ModelSpec& spec, std::size_t points) {
  const int K = spec.K();
  if (static_cast<int>(x_t.n_elem) != spec.D())
    throw std::invalid_argument("transition_prob: covariate length mismatch");
  arma::rowvec mean;
  if (spec.D() > 0)
    mean = x_t.t() * theta_s.lambda;
  else
    mean = arma::rowvec(K, arma::fill::zeros);
  if (alpha_prev != nullptr)
    mean += design_vector(*alpha_prev, spec, spec.trans_order()) * theta_s.xi;
  arma::vec lower(K), upper(K);
  for (int k = 0; k < K; ++k) {
    lower[k] = theta_s.gamma(k, alpha_t[k]);
    upper[k] = theta_s.gamma(k, alpha_t[k] + 1);
  }
  return mvn_rect_prob(mean.t(), theta_s.R, lower, upper, points);
}

double monotone_truncation_point(int h, const arma::vec& beta_j,
                                 const ModelSpec& spec) {
  if (h < 0 || h >= spec.H())
    throw std::invalid_argument("monotone_truncation_point: column out of range");
  if (h == 0) return -kInf;  // intercept is unconstrained
  const arma::mat& P = spec.monotone_pair_diffs();
  const auto& touching = spec.pairs_touching_col()[h];
  double best = -kInf;
  for (arma::uword p : touching) {
    // -(d_u - d_v) beta with components 0 (intercept, diff 0) and h removed.
    double val = -(arma::dot(P.row(p), beta_j) - P(p, h) * beta_j[h]);
    if (val > best) best = val;
  }
  return best;
}

bool check_monotone(const arma::vec& beta_j, const ModelSpec& spec,
                    double tol) {
  const arma::mat& P = spec.monotone_pair_diffs();
  for (arma::uword p = 0; p < P.n_rows; ++p)
    if (arma::dot(P.row(p), beta_j) < -tol) return false;
  return true;
}

}  // namespace lrlcm
