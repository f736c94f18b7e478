#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "okaem/errors.hpp"

namespace okaem {

using idx = std::int64_t;

// Dense row-major float64 matrix. The single value carrier for populations,
// fitness columns, attention matrices and model weights.
class Tensor2 {
public:
    Tensor2() = default;

    // Zero-filled r x c tensor.
    Tensor2(idx rows, idx cols) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0)
            throw shape_error("Tensor2: negative dimension");
        data_.assign(static_cast<std::size_t>(rows * cols), 0.0);
    }

    // Validating constructor: size must match and every entry must be finite.
    static Tensor2 from_values(idx rows, idx cols, std::vector<double> values) {
        if (rows < 0 || cols < 0 ||
            values.size() != static_cast<std::size_t>(rows * cols))
            throw shape_error("Tensor2: data length != rows*cols");
        for (double v : values)
            if (!std::isfinite(v))
                throw param_error("Tensor2: non-finite entry rejected");
        Tensor2 t;
        t.rows_ = rows;
        t.cols_ = cols;
        t.data_ = std::move(values);
        return t;
    }

    static Tensor2 filled(idx rows, idx cols, double v) {
        if (!std::isfinite(v))
            throw param_error("Tensor2: non-finite fill value");
        Tensor2 t(rows, cols);
        for (double& x : t.data_) x = v;
        return t;
    }

    idx rows() const { return rows_; }
    idx cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(idx r, idx c) { return data_[static_cast<std::size_t>(r * cols_ + c)]; }
    double operator()(idx r, idx c) const { return data_[static_cast<std::size_t>(r * cols_ + c)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double* row(idx r) { return data_.data() + static_cast<std::size_t>(r * cols_); }
    const double* row(idx r) const { return data_.data() + static_cast<std::size_t>(r * cols_); }

    bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    idx rows_ = 0;
    idx cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor2& a, const Tensor2& b, const char* where) {
    if (!a.same_shape(b))
        throw shape_error(std::string(where) + ": shape mismatch " + a.shape_str() +
                          " vs " + b.shape_str());
}

} // namespace okaem
