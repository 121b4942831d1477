#include "esg/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "esg/error.hpp"

namespace esg {

double grad_check(
    const std::function<double(const std::vector<tensor>&)>& f,
    std::vector<tensor> params, const std::vector<tensor>& analytic,
    double eps) {
    if (params.size() != analytic.size()) {
        throw usage_error("grad_check: analytic gradient count mismatch");
    }
    double max_rel = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        check_same_dims(params[p], analytic[p], "grad_check");
        for (int i = 0; i < params[p].size(); ++i) {
            double saved = params[p].v[i];
            params[p].v[i] = saved + eps;
            double plus = f(params);
            params[p].v[i] = saved - eps;
            double minus = f(params);
            params[p].v[i] = saved;
            if (!std::isfinite(plus) || !std::isfinite(minus)) {
                throw numeric_error("grad_check: objective is not finite");
            }
            double numeric = (plus - minus) / (2.0 * eps);
            double a = analytic[p].v[i];
            double denom =
                std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
        }
    }
    return max_rel;
}

double grad_check(const std::function<double(const tensor&)>& f,
                  tensor param, const tensor& analytic, double eps) {
    auto wrapped = [&f](const std::vector<tensor>& ps) { return f(ps[0]); };
    return grad_check(wrapped, {std::move(param)}, {analytic}, eps);
}

}  // namespace esg
