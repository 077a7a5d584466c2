#pragma once

#include <utility>
#include <vector>

// Small self-contained statistics kit shared by structure learning, the
// benchmarks and the test suites.
namespace sphunc::stats {

// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double a, double b, double x);

// Upper tail of the F distribution: P(F_{d1,d2} > f).
double f_survival(double f, double d1, double d2);

// Benjamini-Hochberg: returns a keep/reject flag per p-value at FDR level q.
std::vector<bool> benjamini_hochberg(const std::vector<double>& pvals, double q);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Spearman rank correlation (midranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// L1 distance between normalized histograms of a and b on shared
// equal-width bins spanning the pooled range.
double histogram_l1(const std::vector<double>& a, const std::vector<double>& b,
                    int bins);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit fit_line(const std::vector<std::pair<double, double>>& points);

double mean(const std::vector<double>& xs);
double variance(const std::vector<double>& xs);  // unbiased

}  // namespace sphunc::stats
