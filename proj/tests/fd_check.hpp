#pragma once

// Central finite-difference oracle for gradient checks. Lives in test code and
// stays independent of the autodiff path it verifies.

#include <cmath>
#include <functional>
#include <vector>

#include "ordlab/tensor.hpp"

namespace ordlab::test {

struct FdResult {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    size_t worst_index = 0;
};

// Compares the gradient stored on `leaf` against central differences of
// `scalar_fn` (which must rebuild the computation from leaf values).
// The floor keeps cancellation noise (~1e-11 absolute at step 1e-5) from
// dominating the relative error where the true gradient is near zero.
inline FdResult fd_compare(const Tensor& leaf, const std::function<double()>& scalar_fn,
                           double step = 1e-5, double floor = 1e-5) {
    FdResult res;
    for (size_t i = 0; i < leaf->size(); ++i) {
        double saved = leaf->values[i];
        leaf->values[i] = saved + step;
        double up = scalar_fn();
        leaf->values[i] = saved - step;
        double down = scalar_fn();
        leaf->values[i] = saved;
        double numeric = (up - down) / (2.0 * step);
        double analytic = leaf->grad.empty() ? 0.0 : leaf->grad[i];
        double denom = std::max({std::fabs(numeric), std::fabs(analytic), floor});
        double rel = std::fabs(numeric - analytic) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_analytic = analytic;
            res.worst_numeric = numeric;
            res.worst_index = i;
        }
    }
    return res;
}

}  // namespace ordlab::test
