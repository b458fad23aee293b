#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "secreq/errors.hpp"
#include "secreq/stats.hpp"

using namespace secreq;

namespace {

// Brute-force oracle: adaptive Simpson integration of the beta density.
double ibeta_by_integration(double a, double b, double x) {
  auto f = [a, b](double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t));
  };
  // composite Simpson with many panels; integrand is smooth for a,b >= 1
  const int panels = 200000;
  double h = x / panels;
  double sum = f(1e-300) + f(x);
  for (int i = 1; i < panels; ++i)
    sum += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  double integral = sum * h / 3.0;
  double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return integral / std::exp(log_beta);
}

}  // namespace

TEST_CASE("regularized incomplete beta matches a numerical oracle to 1e-8") {
  for (double a : {1.0, 2.5, 4.0, 10.0}) {
    for (double b : {1.0, 3.0, 7.5}) {
      for (double x : {0.05, 0.3, 0.5, 0.77, 0.95}) {
        double expected = ibeta_by_integration(a, b, x);
        CHECK(regularized_incomplete_beta(a, b, x) ==
              doctest::Approx(expected).epsilon(1e-8));
      }
    }
  }
  CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);
  CHECK_THROWS_AS(regularized_incomplete_beta(0, 1, 0.5), ValidationError);
  CHECK_THROWS_AS(regularized_incomplete_beta(1, 1, 1.5), ValidationError);
}

TEST_CASE("welch fixture: t = -1, df = 8, p around 0.3466") {
  std::vector<double> a{1, 2, 3, 4, 5};
  std::vector<double> b{2, 3, 4, 5, 6};
  auto result = welch_t(a, b);
  CHECK(result.t == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(result.df == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(result.p_value == doctest::Approx(0.34659350708733416).epsilon(1e-3));
}

TEST_CASE("welch is antisymmetric in its arguments") {
  std::vector<double> a{1.2, 3.4, 2.2, 5.6, 4.4};
  std::vector<double> b{2.0, 2.5, 9.1, 0.3};
  auto ab = welch_t(a, b);
  auto ba = welch_t(b, a);
  CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
  CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
  CHECK(ab.df == doctest::Approx(ba.df).epsilon(1e-12));
}

TEST_CASE("welch edge behavior") {
  std::vector<double> same{1, 2, 3};
  auto result = welch_t(same, same);
  CHECK(result.t == 0.0);
  CHECK(result.p_value == doctest::Approx(1.0));

  std::vector<double> low{0.0, 0.1, 0.05, 0.02};
  std::vector<double> high{100.0, 101.0, 99.5, 100.2};
  CHECK(welch_t(low, high).p_value < 0.05);

  std::vector<double> constant{5, 5, 5};
  CHECK_THROWS_AS(welch_t(constant, constant), ValidationError);
  std::vector<double> one{1};
  CHECK_THROWS_AS(welch_t(one, same), ValidationError);
}

TEST_CASE("icc additive-shift fixture gives ICC 1 with MS_error 0") {
  std::vector<std::vector<double>> ratings{{1, 2}, {2, 3}, {3, 4}};
  auto result = icc_2k(ratings);
  CHECK(result.icc == doctest::Approx(1.0));
  CHECK(std::isinf(result.f_statistic));
  CHECK(result.p_value == 0.0);
  CHECK(result.df1 == doctest::Approx(2.0));
  CHECK(result.df2 == doctest::Approx(2.0));
}

TEST_CASE("identical raters with subject variance give ICC 1") {
  std::vector<std::vector<double>> ratings{{1, 1}, {5, 5}, {9, 9}};
  CHECK(icc_2k(ratings).icc == doctest::Approx(1.0));
}

TEST_CASE("icc is invariant under a constant rater offset") {
  std::vector<std::vector<double>> base{{1, 2.2}, {4, 3.8}, {2, 2.9},
                                        {5, 5.4}};
  std::vector<std::vector<double>> shifted = base;
  for (auto& row : shifted) row[1] += 10.0;
  CHECK(icc_2k(base).icc == doctest::Approx(icc_2k(shifted).icc).epsilon(1e-12));
}

TEST_CASE("icc is invariant under subject reordering") {
  std::vector<std::vector<double>> base{{1, 2.2}, {4, 3.8}, {2, 2.9}};
  std::vector<std::vector<double>> reordered{{2, 2.9}, {1, 2.2}, {4, 3.8}};
  CHECK(icc_2k(base).icc ==
        doctest::Approx(icc_2k(reordered).icc).epsilon(1e-12));
}

TEST_CASE("degenerate icc inputs raise errors") {
  std::vector<std::vector<double>> constant{{3, 3}, {3, 3}, {3, 3}};
  CHECK_THROWS_AS(icc_2k(constant), ValidationError);
  std::vector<std::vector<double>> one_subject{{1, 2}};
  CHECK_THROWS_AS(icc_2k(one_subject), ValidationError);
  std::vector<std::vector<double>> ragged{{1, 2}, {1}};
  CHECK_THROWS_AS(icc_2k(ragged), ValidationError);
}

TEST_CASE("inverse normal CDF hits the standard quantiles") {
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(std::fabs(inverse_normal_cdf(0.5)) < 1e-9);
  CHECK(inverse_normal_cdf(0.025) ==
        doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), ValidationError);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), ValidationError);
}

TEST_CASE("sample size calculator reproduces the reference values") {
  SampleSizeSpec unbounded;
  CHECK(min_sample_size(unbounded) == 385);
  SampleSizeSpec finite;
  finite.population = 470;
  CHECK(min_sample_size(finite) == 212);
}

TEST_CASE("sample size is monotone in margin and population") {
  long long prev = 1LL << 40;
  for (double margin : {0.01, 0.03, 0.05, 0.1, 0.5}) {
    SampleSizeSpec spec;
    spec.margin = margin;
    long long n = min_sample_size(spec);
    CHECK(n <= prev);
    prev = n;
  }
  long long prev_n = 0;
  for (long long population : {50LL, 200LL, 1000LL, 100000LL}) {
    SampleSizeSpec spec;
    spec.population = population;
    long long n = min_sample_size(spec);
    CHECK(n >= prev_n);
    CHECK(n <= population);
    prev_n = n;
  }
}

TEST_CASE("sampling without replacement is seeded and exhaustive") {
  auto s1 = sample_without_replacement(100, 10, 7);
  auto s2 = sample_without_replacement(100, 10, 7);
  CHECK(s1 == s2);
  CHECK(s1.size() == 10);
  std::set<std::size_t> unique(s1.begin(), s1.end());
  CHECK(unique.size() == 10);

  auto all = sample_without_replacement(20, 20, 3);
  std::set<std::size_t> everything(all.begin(), all.end());
  CHECK(everything.size() == 20);
  CHECK(*everything.begin() == 0);
  CHECK(*everything.rbegin() == 19);

  CHECK(sample_without_replacement(5, 0, 1).empty());
  CHECK_THROWS_AS(sample_without_replacement(3, 4, 1), ValidationError);
}
