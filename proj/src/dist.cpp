#include "lrlcm/dist.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lrlcm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}  // namespace

double normal_cdf(double x) {
  if (std::isnan(x)) throw std::invalid_argument("normal_cdf: NaN input");
  if (x == -kInf) return 0.0;
  if (x == kInf) return 1.0;
  return 0.5 * std::erfc(-x / kSqrt2);
}

double log_normal_cdf(double x) {
  if (std::isnan(x)) throw std::invalid_argument("log_normal_cdf: NaN input");
  if (x == kInf) return 0.0;
  if (x == -kInf) return -kInf;
  if (x >= 8.0) return std::log1p(-normal_cdf(-x));
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / kSqrt2));
  // Asymptotic expansion of Mills' ratio; erfc has underflowed by here.
  const double x2 = x * x;
  double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) +
                  105.0 / (x2 * x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

double log1mexp(double z) {
  if (z >= 0.0) throw std::invalid_argument("log1mexp: argument must be negative");
  if (z > -0.6931471805599453) return std::log(-std::expm1(z));
  return std::log1p(-std::exp(z));
}

double log_normal_cdf_interval(double a, double b) {
  if (std::isnan(a) || std::isnan(b))
    throw std::invalid_argument("log_normal_cdf_interval: NaN bound");
  if (!(a < b)) throw std::invalid_argument("log_normal_cdf_interval: need a < b");
  if (a >= 0.0) return log_normal_cdf_interval(-b, -a);
  if (b <= 0.0) {
    const double la = log_normal_cdf(a);
    const double lb = log_normal_cdf(b);
    if (la == -kInf) return lb;
    const double d = la - lb;
    if (d >= 0.0) return -kInf;  // equal masses to double precision
    return lb + log1mexp(d);
  }
  // Window straddles zero: no cancellation, the mass is at least
  // Phi(b) - Phi(0).
  return std::log(normal_cdf(b) - normal_cdf(a));
}

// Wichura (1988) algorithm AS 241, PPND16.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) *
                    r +
                4.5921953931549871457e+4) *
                   r +
               1.3731693765509461125e+4) *
                  r +
              1.9715909503065514427e+3) *
                 r +
             1.3314166789178437745e+2) *
                r +
            3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) *
                    r +
                2.1213794301586595867e+4) *
                   r +
               5.3941960214247511077e+3) *
                  r +
              6.8718700749205790830e+2) *
                 r +
             4.2313330701600911252e+1) *
                r +
            1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e+0) *
                  r +
              3.64784832476320460504e+0) *
                 r +
             5.76949722146069140550e+0) *
                r +
            4.63033784615654529590e+0) *
               r +
           1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e+0) *
                r +
            2.05319162663775882187e+0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e+0) *
                r +
            5.46378491116411436990e+0) *
               r +
           6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

double sample_normal(RngStream& rng) { return normal_quantile(rng.uniform()); }

namespace {

// One-sided tail sampler for standardized lower bound a > 0, upper bound b
// (possibly infinite): Robert's shifted-exponential rejection, with the
// proposal drawn by inverse cdf on the window so narrow windows stay cheap.
double tail_truncated_std_normal(double a, double b, RngStream& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  const double cap =
      (b == kInf) ? 1.0 : -std::expm1(-lambda * (b - a));  // P(E < b-a)
  for (;;) {
    const double u = rng.uniform();
    const double z = a - std::log1p(-u * cap) / lambda;
    const double d = z - lambda;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

}  // namespace

double sample_truncated_normal(double mu, double var, double lo, double hi,
                               RngStream& rng) {
  if (!(var > 0.0) || std::isnan(var))
    throw std::invalid_argument("sample_truncated_normal: variance must be > 0");
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
    throw std::invalid_argument("sample_truncated_normal: invalid bounds");
  const double sd = std::sqrt(var);
  double a = (lo == -kInf) ? -kInf : (lo - mu) / sd;
  double b = (hi == kInf) ? kInf : (hi - mu) / sd;

  double z;
  if (a > 5.0) {
    z = tail_truncated_std_normal(a, b, rng);
  } else if (b < -5.0) {
    z = -tail_truncated_std_normal(-b, -a, rng);
  } else if (a >= 0.0) {
    // Both bounds in the upper half: work with upper-tail masses.
    const double qa = normal_cdf(-a);
    const double qb = (b == kInf) ? 0.0 : normal_cdf(-b);
    const double q = qb + rng.uniform() * (qa - qb);
    z = -normal_quantile(std::min(std::max(q, 1e-300), 1.0 - 1e-16));
  } else if (b <= 0.0) {
    const double pa = (a == -kInf) ? 0.0 : normal_cdf(a);
    const double pb = normal_cdf(b);
    const double p = pa + rng.uniform() * (pb - pa);
    z = normal_quantile(std::min(std::max(p, 1e-300), 1.0 - 1e-16));
  } else {
    const double pa = (a == -kInf) ? 0.0 : normal_cdf(a);
    const double pb = (b == kInf) ? 1.0 : normal_cdf(b);
    const double p = pa + rng.uniform() * (pb - pa);
    z = normal_quantile(std::min(std::max(p, 1e-300), 1.0 - 1e-16));
  }

  double x = mu + sd * z;
  // Guard against roundoff pushing the draw onto or past a bound; the
  // contract is x in (lo, hi].
  if (x <= lo) x = std::nextafter(lo, kInf);
  if (x > hi) x = hi;
  return x;
}

double sample_trunc_exponential(double rate, double lo, double hi,
                                RngStream& rng) {
  if (!(rate > 0.0) || std::isnan(rate))
    throw std::invalid_argument("sample_trunc_exponential: rate must be > 0");
  if (!std::isfinite(lo) || std::isnan(hi) || !(lo < hi))
    throw std::invalid_argument("sample_trunc_exponential: empty window");
  const double u = rng.uniform();
  double e;
  if (hi == kInf) {
    e = -std::log1p(-u) / rate;
  } else {
    const double cap = -std::expm1(-rate * (hi - lo));
    e = -std::log1p(-u * cap) / rate;
  }
  double x = lo + e;
  if (x <= lo) x = std::nextafter(lo, kInf);
  if (x >= hi) x = std::nextafter(hi, -kInf);
  return x;
}

double sample_gamma(double shape, RngStream& rng) {
  if (!(shape > 0.0))
    throw std::invalid_argument("sample_gamma: shape must be > 0");
  if (shape < 1.0) {
    // Boost to shape+1 and scale back.
    const double g = sample_gamma(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_chisq(double dof, RngStream& rng) {
  return 2.0 * sample_gamma(0.5 * dof, rng);
}

double sample_beta(double a, double b, RngStream& rng) {
  const double x = sample_gamma(a, rng);
  const double y = sample_gamma(b, rng);
  return x / (x + y);
}

std::size_t sample_categorical(const arma::vec& weights, RngStream& rng) {
  if (weights.n_elem == 0)
    throw std::invalid_argument("sample_categorical: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (std::isnan(w) || w < 0.0)
      throw std::invalid_argument("sample_categorical: negative or NaN weight");
    total += w;
  }
  if (!(total > 0.0))
    throw std::invalid_argument("sample_categorical: all weights are zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < weights.n_elem; ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return weights.n_elem - 1;
}

bool is_positive_definite(const arma::mat& m) {
  if (m.n_rows != m.n_cols || m.n_rows == 0) return false;
  if (!m.is_symmetric(1e-10)) return false;
  arma::mat L;
  return arma::chol(L, arma::symmatu(m), "lower");
}

arma::mat chol_lower(const arma::mat& m, const char* what) {
  arma::mat L;
  if (m.n_rows != m.n_cols || !arma::chol(L, arma::symmatu(m), "lower"))
    throw std::invalid_argument(std::string(what) +
                                ": matrix is not positive definite");
  return L;
}

arma::mat sample_inverse_wishart(const arma::mat& scale, double dof,
                                 RngStream& rng) {
  const arma::uword K = scale.n_rows;
  if (!(dof > static_cast<double>(K) - 1.0))
    throw std::invalid_argument("sample_inverse_wishart: dof must exceed K - 1");
  const arma::mat scale_inv =
      arma::inv_sympd(arma::symmatu(scale));  // throws/fails on non-PD
  if (!scale_inv.is_finite())
    throw std::invalid_argument("sample_inverse_wishart: scale not PD");
  const arma::mat C = chol_lower(scale_inv, "sample_inverse_wishart");
  // Bartlett factor of Wishart(scale^-1, dof).
  arma::mat A(K, K, arma::fill::zeros);
  for (arma::uword i = 0; i < K; ++i) {
    A(i, i) = std::sqrt(sample_chisq(dof - static_cast<double>(i), rng));
    for (arma::uword j = 0; j < i; ++j) A(i, j) = sample_normal(rng);
  }
  const arma::mat T = C * A;  // W = T T'
  const arma::mat Tinv = arma::solve(arma::trimatl(T), arma::eye(K, K));
  arma::mat X = Tinv.t() * Tinv;  // W^-1
  return arma::symmatu(X);
}

arma::mat sample_matrix_normal(const arma::mat& mean, const arma::mat& row_cov,
                               const arma::mat& col_cov, RngStream& rng) {
  if (row_cov.n_rows != mean.n_rows || col_cov.n_rows != mean.n_cols)
    throw std::invalid_argument("sample_matrix_normal: dimension mismatch");
  const arma::mat Lr = chol_lower(row_cov, "sample_matrix_normal row_cov");
  const arma::mat Lc = chol_lower(col_cov, "sample_matrix_normal col_cov");
  arma::mat Z(mean.n_rows, mean.n_cols);
  for (arma::uword j = 0; j < Z.n_cols; ++j)
    for (arma::uword i = 0; i < Z.n_rows; ++i) Z(i, j) = sample_normal(rng);
  return mean + Lr * Z * Lc.t();
}

namespace {

// First 16 square-root-of-prime fractional generators for the Richtmyer
// sequence, plus a fixed shift so the rule is scrambled but deterministic.
struct RichtmyerRule {
  arma::vec gen;
  arma::vec shift;
  explicit RichtmyerRule(std::size_t dim) : gen(dim), shift(dim) {
    static const double primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                    23, 29, 31, 37, 41, 43, 47, 53};
    RngStream shift_rng(0x5eedULL, 42);  // fixed scrambling seed
    for (std::size_t i = 0; i < dim; ++i) {
      double s = std::sqrt(primes[i % 16]);
      gen[i] = s - std::floor(s);
      shift[i] = shift_rng.uniform();
    }
  }
  double point(std::size_t m, std::size_t i) const {
    double v = static_cast<double>(m + 1) * gen[i] + shift[i];
    return v - std::floor(v);
  }
};

double clamp01(double p) {
  if (p < 1e-15) return 1e-15;
  if (p > 1.0 - 1e-15) return 1.0 - 1e-15;
  return p;
}

}  // namespace

double mvn_rect_prob(const arma::vec& mean, const arma::mat& corr,
                     const arma::vec& lower, const arma::vec& upper,
                     std::size_t points) {
  const arma::uword K = mean.n_elem;
  if (corr.n_rows != K || corr.n_cols != K || lower.n_elem != K ||
      upper.n_elem != K)
    throw std::invalid_argument("mvn_rect_prob: dimension mismatch");
  for (arma::uword k = 0; k < K; ++k) {
    if (std::isnan(lower[k]) || std::isnan(upper[k]) || !(lower[k] < upper[k]))
      throw std::invalid_argument("mvn_rect_prob: invalid bounds");
    if (std::fabs(corr(k, k) - 1.0) > 1e-10)
      throw std::invalid_argument("mvn_rect_prob: diagonal must be 1");
  }
  arma::vec a(K), b(K);
  for (arma::uword k = 0; k < K; ++k) {
    a[k] = (lower[k] == -kInf) ? -kInf : lower[k] - mean[k];
    b[k] = (upper[k] == kInf) ? kInf : upper[k] - mean[k];
  }
  if (K == 1) return normal_cdf(b[0]) - normal_cdf(a[0]);

  const arma::mat L = chol_lower(corr, "mvn_rect_prob corr");

  // Genz separation of variables over the unit cube of dimension K-1.
  RichtmyerRule rule(K - 1);
  arma::vec y(K - 1);
  double sum = 0.0;
  for (std::size_t m = 0; m < points; ++m) {
    double d0 = (a[0] == -kInf) ? 0.0 : normal_cdf(a[0] / L(0, 0));
    double e0 = (b[0] == kInf) ? 1.0 : normal_cdf(b[0] / L(0, 0));
    double f = e0 - d0;
    double d = d0, e = e0;
    for (arma::uword i = 1; i < K && f > 0.0; ++i) {
      const double w = rule.point(m, i - 1);
      y[i - 1] = normal_quantile(clamp01(d + w * (e - d)));
      double q = 0.0;
      for (arma::uword j = 0; j < i; ++j) q += L(i, j) * y[j];
      d = (a[i] == -kInf) ? 0.0 : normal_cdf((a[i] - q) / L(i, i));
      e = (b[i] == kInf) ? 1.0 : normal_cdf((b[i] - q) / L(i, i));
      f *= std::max(e - d, 0.0);
    }
    sum += f;
  }
  double p = sum / static_cast<double>(points);
  return std::min(std::max(p, 0.0), 1.0);
}

}  // namespace lrlcm
