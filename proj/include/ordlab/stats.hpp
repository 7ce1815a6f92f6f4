#pragma once

#include <cstddef>
#include <vector>

namespace ordlab {

// Upper-tail p-value of a chi-square statistic with df degrees of freedom.
double chi_square_pvalue(double statistic, int df);

// One-sided exact sign test: P(X >= n_plus) for X ~ Binomial(n_plus + n_minus, 1/2).
// Ties (samples unchanged) are dropped by the caller.
double sign_test_pvalue(size_t n_plus, size_t n_minus);

// Spearman rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace ordlab
