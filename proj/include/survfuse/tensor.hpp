#ifndef SURVFUSE_TENSOR_HPP
#define SURVFUSE_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/errors.hpp"

namespace survfuse {

// Dense row-major n-dimensional array of doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != numel_of(shape))
            throw DimensionError("tensor values length " + std::to_string(values.size()) +
                                 " does not match shape " + shape_str(shape));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        const std::size_t n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> s, double v) {
        const std::size_t n = numel_of(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    // 2-d identity.
    static Tensor identity(std::size_t n) {
        Tensor t = zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) t.values[i * n + i] = 1.0;
        return t;
    }

    std::size_t numel() const { return values.size(); }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    std::string shape_str() const { return shape_str(shape); }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
}

} // namespace survfuse

#endif
