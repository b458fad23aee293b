#include "secreq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "secreq/errors.hpp"

namespace secreq {

namespace {

// continued fraction for the incomplete beta, modified Lentz
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw ValidationError("regularized_incomplete_beta: did not converge");
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) /
         static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x, double mean) {
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0)
    throw ValidationError("regularized_incomplete_beta: a, b must be > 0");
  if (x < 0.0 || x > 1.0)
    throw ValidationError("regularized_incomplete_beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  // symmetry keeps the continued fraction in its fast-converging region
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw ValidationError("student_t_two_sided_p: df must be > 0");
  double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

double f_upper_tail_p(double f, double d1, double d2) {
  if (d1 <= 0.0 || d2 <= 0.0)
    throw ValidationError("f_upper_tail_p: degrees must be > 0");
  if (f <= 0.0) return 1.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double inverse_normal_cdf(double p) {
  if (p <= 0.0 || p >= 1.0)
    throw ValidationError("inverse_normal_cdf: p must be in (0, 1)");

  // Acklam's rational approximation
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // one Halley refinement against the actual CDF
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError("welch_t: each sample needs at least 2 values");
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  double ma = mean_of(a);
  double mb = mean_of(b);
  double va = sample_variance(a, ma);
  double vb = sample_variance(b, mb);
  if (va <= 0.0 && vb <= 0.0)
    throw ValidationError("welch_t: both samples have zero variance");

  double sa = va / na;
  double sb = vb / nb;
  WelchResult result;
  result.t = (ma - mb) / std::sqrt(sa + sb);
  result.df = (sa + sb) * (sa + sb) /
              (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  result.p_value = student_t_two_sided_p(result.t, result.df);
  return result;
}

IccResult icc_2k(const std::vector<std::vector<double>>& ratings) {
  std::size_t n = ratings.size();
  if (n < 2) throw ValidationError("icc_2k: need at least 2 subjects");
  std::size_t k = ratings[0].size();
  if (k < 2) throw ValidationError("icc_2k: need at least 2 raters");
  for (const auto& row : ratings)
    if (row.size() != k)
      throw ValidationError("icc_2k: ragged ratings matrix");

  double grand = 0.0;
  for (const auto& row : ratings)
    for (double v : row) grand += v;
  grand /= static_cast<double>(n * k);

  std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      row_mean[i] += ratings[i][j];
      col_mean[j] += ratings[i][j];
    }
    row_mean[i] /= static_cast<double>(k);
  }
  for (std::size_t j = 0; j < k; ++j) col_mean[j] /= static_cast<double>(n);

  double ss_rows = 0.0, ss_cols = 0.0, ss_total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ss_rows += (row_mean[i] - grand) * (row_mean[i] - grand);
  ss_rows *= static_cast<double>(k);
  for (std::size_t j = 0; j < k; ++j)
    ss_cols += (col_mean[j] - grand) * (col_mean[j] - grand);
  ss_cols *= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      ss_total += (ratings[i][j] - grand) * (ratings[i][j] - grand);
  double ss_error = ss_total - ss_rows - ss_cols;

  double df_rows = static_cast<double>(n - 1);
  double df_error = static_cast<double>((n - 1) * (k - 1));
  double ms_rows = ss_rows / df_rows;
  double ms_error = ss_error / df_error;
  if (ms_rows <= 0.0)
    throw ValidationError("icc_2k: zero between-subject variance");

  IccResult result;
  result.icc = (ms_rows - ms_error) / ms_rows;
  result.df1 = df_rows;
  result.df2 = df_error;
  if (ms_error <= 0.0) {
    result.f_statistic = std::numeric_limits<double>::infinity();
    result.p_value = 0.0;
  } else {
    result.f_statistic = ms_rows / ms_error;
    result.p_value = f_upper_tail_p(result.f_statistic, df_rows, df_error);
  }
  return result;
}

long long min_sample_size(const SampleSizeSpec& spec) {
  if (spec.confidence <= 0.0 || spec.confidence >= 1.0)
    throw ValidationError("min_sample_size: confidence must be in (0, 1)");
  if (spec.margin <= 0.0 || spec.margin >= 1.0)
    throw ValidationError("min_sample_size: margin must be in (0, 1)");
  if (spec.proportion <= 0.0 || spec.proportion >= 1.0)
    throw ValidationError("min_sample_size: proportion must be in (0, 1)");

  double z = inverse_normal_cdf(1.0 - (1.0 - spec.confidence) / 2.0);
  double n0 = z * z * spec.proportion * (1.0 - spec.proportion) /
              (spec.margin * spec.margin);
  if (spec.population <= 0) return static_cast<long long>(std::ceil(n0));
  double nn = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(spec.population));
  auto n = static_cast<long long>(std::ceil(nn));
  return std::min(n, spec.population);
}

std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                    std::size_t n,
                                                    std::uint64_t seed) {
  if (n > population)
    throw ValidationError(
        "sample_without_replacement: n exceeds population size");
  std::vector<std::size_t> indices(population);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    // uniform pick in [i, population) without distribution objects so
    // the draw sequence is identical on every platform
    std::size_t j = i + static_cast<std::size_t>(rng() % (population - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(n);
  return indices;
}

}  // namespace secreq
