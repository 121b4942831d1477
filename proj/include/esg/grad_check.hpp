#pragma once

#include <functional>
#include <vector>

#include "esg/tensor.hpp"

namespace esg {

// Central-difference check of analytic gradients.
//
// f evaluates the scalar objective at the given parameter values;
// analytic holds the gradients under test, one tensor per parameter,
// dims matching. Returns the max relative error over all coordinates
// with denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(
    const std::function<double(const std::vector<tensor>&)>& f,
    std::vector<tensor> params, const std::vector<tensor>& analytic,
    double eps = 1e-4);

// single-parameter convenience
double grad_check(const std::function<double(const tensor&)>& f,
                  tensor param, const tensor& analytic, double eps = 1e-4);

}  // namespace esg
