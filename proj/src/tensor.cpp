#include "esg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "esg/error.hpp"

namespace esg {

int dim_product(const std::vector<int>& dims) {
    int n = 1;
    for (int d : dims) {
        if (d <= 0) {
            throw shape_error("tensor dims must be positive");
        }
        n *= d;
    }
    return n;
}

tensor::tensor(std::vector<int> d, std::vector<double> values)
    : dims(std::move(d)), v(std::move(values)) {
    if (dim_product(dims) != size()) {
        throw shape_error("tensor value count does not match dims " +
                          dims_str());
    }
}

tensor tensor::zeros(std::vector<int> dims) {
    int n = dim_product(dims);
    return tensor(std::move(dims), std::vector<double>(n, 0.0));
}

tensor tensor::full(std::vector<int> dims, double value) {
    int n = dim_product(dims);
    return tensor(std::move(dims), std::vector<double>(n, value));
}

tensor tensor::vec(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return tensor({n}, std::move(values));
}

tensor tensor::mat(int rows, int cols, std::vector<double> values) {
    return tensor({rows, cols}, std::move(values));
}

tensor tensor::identity(int n) {
    tensor t = zeros({n, n});
    for (int i = 0; i < n; ++i) {
        t(i, i) = 1.0;
    }
    return t;
}

tensor tensor::uniform(std::vector<int> dims, double lo, double hi,
                       counter_rng& rng) {
    tensor t = zeros(std::move(dims));
    for (double& x : t.v) {
        x = rng.next_real(lo, hi);
    }
    return t;
}

tensor tensor::normal(std::vector<int> dims, double sigma, counter_rng& rng) {
    tensor t = zeros(std::move(dims));
    for (double& x : t.v) {
        x = rng.next_normal(sigma);
    }
    return t;
}

int tensor::rows() const {
    if (rank() != 2) {
        throw shape_error("rows() on tensor of rank " +
                          std::to_string(rank()));
    }
    return dims[0];
}

int tensor::cols() const {
    if (rank() != 2) {
        throw shape_error("cols() on tensor of rank " +
                          std::to_string(rank()));
    }
    return dims[1];
}

double& tensor::operator()(int i, int j) {
    return v[static_cast<std::size_t>(i) * dims[1] + j];
}

double tensor::operator()(int i, int j) const {
    return v[static_cast<std::size_t>(i) * dims[1] + j];
}

bool tensor::all_finite() const {
    return std::all_of(v.begin(), v.end(),
                       [](double x) { return std::isfinite(x); });
}

void tensor::fill(double value) {
    std::fill(v.begin(), v.end(), value);
}

std::string tensor::dims_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        os << (i ? "x" : "") << dims[i];
    }
    os << "]";
    return os.str();
}

void check_same_dims(const tensor& a, const tensor& b, const char* what) {
    if (!a.same_dims(b)) {
        throw shape_error(std::string(what) + ": dims " + a.dims_str() +
                          " vs " + b.dims_str());
    }
}

}  // namespace esg
