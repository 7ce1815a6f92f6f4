#include "ordlab/stats.hpp"

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_sf_gamma.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ordlab/errors.hpp"

namespace ordlab {

double chi_square_pvalue(double statistic, int df) {
    if (df < 1) throw ContractError("chi_square_pvalue: df must be >= 1");
    if (statistic <= 0.0) return 1.0;
    return gsl_sf_gamma_inc_Q(0.5 * df, 0.5 * statistic);
}

double sign_test_pvalue(size_t n_plus, size_t n_minus) {
    const size_t n = n_plus + n_minus;
    if (n == 0) return 1.0;
    if (n_plus == 0) return 1.0;
    // P(X >= n_plus) = Q(n_plus - 1) for the binomial CDF convention.
    return gsl_cdf_binomial_Q(static_cast<unsigned>(n_plus - 1), 0.5, static_cast<unsigned>(n));
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}
}  // namespace

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ContractError("spearman_rho: need two equally sized series of length >= 2");
    std::vector<double> rx = average_ranks(xs), ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace ordlab
