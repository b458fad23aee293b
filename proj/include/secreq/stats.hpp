#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace secreq {

/// Regularized incomplete beta function I_x(a, b), evaluated with the
/// standard continued fraction (modified Lentz).
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided tail probability of Student's t with `df` degrees.
double student_t_two_sided_p(double t, double df);

/// Upper tail P(F > f) for the F distribution with (d1, d2) degrees.
double f_upper_tail_p(double f, double d1, double d2);

/// Inverse standard normal CDF (Acklam's rational approximation,
/// refined with one Halley step); |error| < 1e-9.
double inverse_normal_cdf(double p);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;      // Welch-Satterthwaite
  double p_value = 1.0;  // two-sided
};

/// Welch's unequal-variances t-test. Requires each sample size >= 2 and
/// positive variance in at least one sample.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

struct IccResult {
  double icc = 0.0;
  double f_statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p_value = 1.0;
  const char* design = "ICC(2,k) consistency";
};

/// Two-way, average-measures, consistency intraclass correlation:
/// ICC = (MS_rows - MS_error) / MS_rows with F = MS_rows / MS_error on
/// (n-1, (n-1)(k-1)) degrees of freedom. `ratings` is subjects x
/// raters, no missing cells. Throws on zero between-subject variance.
IccResult icc_2k(const std::vector<std::vector<double>>& ratings);

struct SampleSizeSpec {
  // population <= 0 means unbounded
  long long population = 0;
  double confidence = 0.95;
  double margin = 0.05;
  double proportion = 0.5;
};

/// Cochran sample size with finite-population correction:
/// n0 = z^2 p(1-p)/e^2; finite N -> n0 / (1 + (n0-1)/N); ceil.
long long min_sample_size(const SampleSizeSpec& spec);

/// Seeded uniform sample without replacement (partial Fisher-Yates over
/// indices, mt19937_64); stable across platforms.
std::vector<std::size_t> sample_without_replacement(std::size_t population,
                                                    std::size_t n,
                                                    std::uint64_t seed);

}  // namespace secreq
