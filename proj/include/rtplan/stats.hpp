#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rtplan::stats {

double mean(std::span<const double> x);
double sample_std(std::span<const double> x);      // (n - 1) denominator
double population_std(std::span<const double> x);  // n denominator

double student_t_cdf(double t, double df);
double chi_square_cdf(double x, double df);

struct PairedTTest {
  double t = 0.0;
  double p_greater = 1.0;  // one-sided P(mean(a - b) <= 0)
  double mean_diff = 0.0;
};
// One-sided paired test of H1: mean(a - b) > 0.
PairedTTest paired_t_greater(std::span<const double> a, std::span<const double> b);

// Spearman rank correlation (average ranks on ties).
double spearman_rho(std::span<const double> x, std::span<const double> y);
// Permutation p-value for H1: rho < 0.
double spearman_perm_p_negative(std::span<const double> x, std::span<const double> y,
                                int n_perm, std::uint64_t seed);

// Pearson chi-square statistic against the uniform distribution.
double chi_square_stat_uniform(const std::vector<std::size_t>& counts);

}  // namespace rtplan::stats
