#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvkid {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Matrix&) const = default;
};

/// A named view over one parameter (or gradient) tensor.
struct TensorRef {
    std::string name;
    std::span<double> values;
};

struct ConstTensorRef {
    std::string name;
    std::span<const double> values;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// y += A x
inline void gemv_acc(const Matrix& a, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == a.cols && y.size() == a.rows);
    const double* p = a.data.data();
    for (std::size_t i = 0; i < a.rows; ++i, p += a.cols) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j)
            s += p[j] * x[j];
        y[i] += s;
    }
}

// y += A^T x
inline void gemv_t_acc(const Matrix& a, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == a.rows && y.size() == a.cols);
    const double* p = a.data.data();
    for (std::size_t i = 0; i < a.rows; ++i, p += a.cols) {
        const double xi = x[i];
        if (xi == 0.0)
            continue;
        for (std::size_t j = 0; j < a.cols; ++j)
            y[j] += p[j] * xi;
    }
}

// A += u v^T
inline void ger_acc(Matrix& a, std::span<const double> u, std::span<const double> v)
{
    assert(u.size() == a.rows && v.size() == a.cols);
    double* p = a.data.data();
    for (std::size_t i = 0; i < a.rows; ++i, p += a.cols) {
        const double ui = u[i];
        if (ui == 0.0)
            continue;
        for (std::size_t j = 0; j < a.cols; ++j)
            p[j] += ui * v[j];
    }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += alpha * x[i];
}

} // namespace mvkid
