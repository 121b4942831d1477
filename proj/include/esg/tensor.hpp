#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "esg/rng.hpp"

namespace esg {

// Dense row-major tensor. Values are stored and accumulated in doubles;
// file formats narrow to 32-bit floats at the IO boundary.
struct tensor {
    std::vector<int> dims;
    std::vector<double> v;

    tensor() = default;
    tensor(std::vector<int> dims, std::vector<double> values);

    static tensor zeros(std::vector<int> dims);
    static tensor full(std::vector<int> dims, double value);
    static tensor vec(std::vector<double> values);
    static tensor mat(int rows, int cols, std::vector<double> values);
    static tensor identity(int n);
    static tensor uniform(std::vector<int> dims, double lo, double hi,
                          counter_rng& rng);
    static tensor normal(std::vector<int> dims, double sigma,
                         counter_rng& rng);

    int size() const { return static_cast<int>(v.size()); }
    int rank() const { return static_cast<int>(dims.size()); }
    int rows() const;
    int cols() const;

    double& operator()(int i) { return v[static_cast<std::size_t>(i)]; }
    double operator()(int i) const { return v[static_cast<std::size_t>(i)]; }
    double& operator()(int i, int j);
    double operator()(int i, int j) const;

    bool same_dims(const tensor& o) const { return dims == o.dims; }
    bool all_finite() const;
    void fill(double value);

    std::string dims_str() const;
};

// throws shape_error unless both tensors have identical dims
void check_same_dims(const tensor& a, const tensor& b, const char* what);

int dim_product(const std::vector<int>& dims);

}  // namespace esg
