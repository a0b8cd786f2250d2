#ifndef MODCAUSAL_STATS_HPP
#define MODCAUSAL_STATS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modcausal/error.hpp"

namespace modcausal::stats {

// ---------------------------------------------------------------------------
// Regularized incomplete beta and the Student t distribution

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  constexpr int max_iter = 100000;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it
/// separately keeps precision when x is close to 1.
inline double incomplete_beta(double a, double b, double x, double y) {
  if (!(a > 0) || !(b > 0)) throw Error("incomplete beta requires a, b > 0");
  if (x <= 0) return 0.0;
  if (y <= 0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, y) / b;
}

inline double incomplete_beta(double a, double b, double x) {
  return incomplete_beta(a, b, x, 1.0 - x);
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw Error("t distribution requires df > 0");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  const double denom = df + t2;
  return std::clamp(incomplete_beta(0.5 * df, 0.5, df / denom, t2 / denom), 0.0, 1.0);
}

inline double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t >= 0 ? 1.0 - tail : tail;
}

// ---------------------------------------------------------------------------
// Ordinary least squares for the four-column segmented design

inline constexpr std::size_t kDesignColumns = 4;
using DesignRow = std::array<double, kDesignColumns>;
using Coefficients = std::array<double, kDesignColumns>;

/// Condition number of the design above which it is treated as rank deficient.
inline constexpr double kMaxCondition = 1e12;

struct OLSFit {
  Coefficients beta{};
  Coefficients se{};
  Coefficients t{};
  Coefficients p{};
  std::size_t n = 0;
  double df = 0; // n - 4, or clusters - 1 for cluster-robust errors
  double rss = 0;
  bool cluster_robust = false;
  std::size_t clusters = 0;
};

struct OLSOptions {
  /// When set, one cluster id per row; standard errors become CR1
  /// cluster-robust and inference uses clusters - 1 degrees of freedom.
  std::optional<std::span<const std::size_t>> clusters;
};

namespace detail {

using Mat4 = std::array<std::array<double, 4>, 4>;

// Singular values of a 4x4 matrix via one-sided Jacobi on its columns.
inline std::array<double, 4> singular_values(Mat4 a) {
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        for (int i = 0; i < 4; ++i) {
          alpha += a[i][p] * a[i][p];
          beta += a[i][q] * a[i][q];
          gamma += a[i][p] * a[i][q];
        }
        if (gamma == 0) continue;
        off = std::max(off, std::fabs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1 + zeta * zeta));
        const double c = 1 / std::sqrt(1 + t * t);
        const double s = c * t;
        for (int i = 0; i < 4; ++i) {
          const double ap = a[i][p], aq = a[i][q];
          a[i][p] = c * ap - s * aq;
          a[i][q] = s * ap + c * aq;
        }
      }
    }
    if (off < 1e-15) break;
  }
  std::array<double, 4> sv{};
  for (int j = 0; j < 4; ++j) {
    double s = 0;
    for (int i = 0; i < 4; ++i) s += a[i][j] * a[i][j];
    sv[j] = std::sqrt(s);
  }
  return sv;
}

} // namespace detail

/// Least squares fit of y on the n x 4 design with classical (or optional
/// cluster-robust) standard errors and two-sided t-distribution p-values.
/// Requires n >= 5 and a full-rank design.
inline OLSFit ols(std::span<const DesignRow> design, std::span<const double> y,
                  const OLSOptions& opts = {}) {
  const std::size_t n = design.size();
  constexpr std::size_t k = kDesignColumns;
  if (y.size() != n) throw ShapeError("design has " + std::to_string(n) + " rows but y has " +
                                      std::to_string(y.size()));
  if (n < k + 1) throw SampleSizeError("OLS needs at least 5 observations, got " + std::to_string(n));
  if (opts.clusters && opts.clusters->size() != n) throw ShapeError("cluster ids must match rows");

  // Householder QR on a column-major copy.
  std::array<std::vector<double>, k> a;
  for (std::size_t j = 0; j < k; ++j) {
    a[j].resize(n);
    for (std::size_t i = 0; i < n; ++i) a[j][i] = design[i][j];
  }
  std::vector<double> qty(y.begin(), y.end());
  for (std::size_t j = 0; j < k; ++j) {
    double norm = 0;
    for (std::size_t i = j; i < n; ++i) norm += a[j][i] * a[j][i];
    norm = std::sqrt(norm);
    if (norm == 0) continue;
    const double alpha = a[j][j] > 0 ? -norm : norm;
    std::vector<double> v(a[j].begin() + static_cast<std::ptrdiff_t>(j), a[j].end());
    v[0] -= alpha;
    double vnorm2 = 0;
    for (double x : v) vnorm2 += x * x;
    if (vnorm2 == 0) continue;
    auto reflect = [&](std::vector<double>& col) {
      double dot = 0;
      for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * col[j + i];
      const double f = 2 * dot / vnorm2;
      for (std::size_t i = 0; i < v.size(); ++i) col[j + i] -= f * v[i];
    };
    for (std::size_t c = j; c < k; ++c) reflect(a[c]);
    reflect(qty);
  }
  detail::Mat4 r{};
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) r[i][j] = a[j][i];

  const auto sv = detail::singular_values(r);
  const double smax = *std::max_element(sv.begin(), sv.end());
  const double smin = *std::min_element(sv.begin(), sv.end());
  if (!(smin > 0) || smax / smin > kMaxCondition)
    throw SingularityError("design matrix is rank deficient (condition > 1e12)");

  // Back substitution for beta and for R^-1.
  OLSFit fit;
  fit.n = n;
  for (std::size_t ii = k; ii-- > 0;) {
    double s = qty[ii];
    for (std::size_t j = ii + 1; j < k; ++j) s -= r[ii][j] * fit.beta[j];
    fit.beta[ii] = s / r[ii][ii];
  }
  detail::Mat4 rinv{};
  for (std::size_t col = 0; col < k; ++col) {
    for (std::size_t ii = k; ii-- > 0;) {
      double s = (ii == col) ? 1.0 : 0.0;
      for (std::size_t j = ii + 1; j < k; ++j) s -= r[ii][j] * rinv[j][col];
      rinv[ii][col] = s / r[ii][ii];
    }
  }
  detail::Mat4 bread{}; // (X'X)^-1 = R^-1 R^-T
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t m = 0; m < k; ++m) bread[i][j] += rinv[i][m] * rinv[j][m];

  std::vector<double> resid(n);
  double yy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0;
    for (std::size_t j = 0; j < k; ++j) f += design[i][j] * fit.beta[j];
    resid[i] = y[i] - f;
    fit.rss += resid[i] * resid[i];
    yy += y[i] * y[i];
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const bool exact_fit = fit.rss <= (64 * eps) * (64 * eps) * yy;

  detail::Mat4 cov{};
  if (opts.clusters) {
    std::map<std::size_t, std::array<double, k>> score;
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = score[(*opts.clusters)[i]];
      for (std::size_t j = 0; j < k; ++j) s[j] += design[i][j] * resid[i];
    }
    fit.cluster_robust = true;
    fit.clusters = score.size();
    if (fit.clusters < 2) throw SampleSizeError("cluster-robust errors need at least 2 clusters");
    detail::Mat4 meat{};
    for (const auto& [_, s] : score)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) meat[i][j] += s[i] * s[j];
    const double g = static_cast<double>(fit.clusters);
    const double scale = g / (g - 1) * (static_cast<double>(n) - 1) / static_cast<double>(n - k);
    detail::Mat4 tmp{};
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t m = 0; m < k; ++m) tmp[i][j] += bread[i][m] * meat[m][j];
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t m = 0; m < k; ++m) cov[i][j] += tmp[i][m] * bread[m][j];
        cov[i][j] *= scale;
      }
    fit.df = g - 1;
  } else {
    fit.df = static_cast<double>(n - k);
    const double sigma2 = exact_fit ? 0.0 : fit.rss / fit.df;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) cov[i][j] = sigma2 * bread[i][j];
  }

  for (std::size_t j = 0; j < k; ++j) {
    fit.se[j] = exact_fit ? 0.0 : std::sqrt(std::max(cov[j][j], 0.0));
    if (fit.se[j] > 0) {
      fit.t[j] = fit.beta[j] / fit.se[j];
      fit.p[j] = student_t_two_sided_p(fit.t[j], fit.df);
    } else {
      // Zero residual variance: a coefficient that contributes nothing to the
      // fit has t = 0, anything else is infinitely significant.
      double col = 0;
      for (std::size_t i = 0; i < n; ++i) col += design[i][j] * design[i][j];
      const bool negligible = std::fabs(fit.beta[j]) * std::sqrt(col) <= 1e-12 * std::sqrt(yy);
      fit.t[j] = negligible ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.beta[j]);
      fit.p[j] = negligible ? 1.0 : 0.0;
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// t-tests

struct TTestResult {
  double statistic = 0;
  double df = 0;
  double p_two_sided = 1;
  double mean_a = 0;
  double mean_b = 0; // mu0 for one-sample tests
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

namespace detail {

struct Moments {
  double mean = 0;
  double var = 0; // sample variance
  double max_abs = 0;
  std::size_t n = 0;
};

inline Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = xs.size();
  for (double x : xs) {
    m.mean += x;
    m.max_abs = std::max(m.max_abs, std::fabs(x));
  }
  m.mean /= static_cast<double>(m.n);
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

// Variance at rounding-noise level counts as zero.
inline bool zero_variance(const Moments& m) {
  const double tol = 16 * std::numeric_limits<double>::epsilon() * m.max_abs;
  return m.var <= tol * tol;
}

inline void require_two(std::span<const double> xs, const char* what) {
  if (xs.size() < 2)
    throw SampleSizeError(std::string(what) + " needs at least 2 observations");
}

} // namespace detail

inline TTestResult t_test_one_sample(std::span<const double> xs, double mu0) {
  detail::require_two(xs, "one-sample t-test");
  const auto m = detail::moments(xs);
  if (detail::zero_variance(m)) throw DegenerateSampleError("sample has zero variance");
  TTestResult r;
  r.n_a = m.n;
  r.mean_a = m.mean;
  r.mean_b = mu0;
  r.df = static_cast<double>(m.n - 1);
  r.statistic = (m.mean - mu0) / std::sqrt(m.var / static_cast<double>(m.n));
  r.p_two_sided = student_t_two_sided_p(r.statistic, r.df);
  return r;
}

/// One-sample test of a - b against 0.
inline TTestResult t_test_paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("paired t-test needs equal-length samples (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  auto r = t_test_one_sample(d, 0.0);
  r.mean_a = detail::moments(a).mean;
  r.mean_b = detail::moments(b).mean;
  r.n_b = b.size();
  return r;
}

/// Welch's unequal-variance two-sample test with Satterthwaite df.
inline TTestResult t_test_welch(std::span<const double> a, std::span<const double> b) {
  detail::require_two(a, "Welch t-test");
  detail::require_two(b, "Welch t-test");
  const auto ma = detail::moments(a);
  const auto mb = detail::moments(b);
  const bool za = detail::zero_variance(ma), zb = detail::zero_variance(mb);
  if (za && zb) throw DegenerateSampleError("both samples have zero variance");
  const double va = za ? 0.0 : ma.var / static_cast<double>(ma.n);
  const double vb = zb ? 0.0 : mb.var / static_cast<double>(mb.n);
  const double s2 = va + vb;
  TTestResult r;
  r.mean_a = ma.mean;
  r.mean_b = mb.mean;
  r.n_a = ma.n;
  r.n_b = mb.n;
  r.statistic = (ma.mean - mb.mean) / std::sqrt(s2);
  r.df = s2 * s2 /
         (va * va / static_cast<double>(ma.n - 1) + vb * vb / static_cast<double>(mb.n - 1));
  r.p_two_sided = student_t_two_sided_p(r.statistic, r.df);
  return r;
}

} // namespace modcausal::stats

#endif // MODCAUSAL_STATS_HPP
