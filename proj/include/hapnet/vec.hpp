#pragma once

#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

#include "hapnet/errors.hpp"

namespace hapnet {

// Dense vector. Shape is fixed at construction; element values must be
// finite. These types live at API boundaries (datasets, pose matrices,
// reports); the autodiff tape works on raw arenas instead.
class Vec {
public:
    Vec() = default;
    explicit Vec(int n) : v_(static_cast<size_t>(n), 0.0) {}
    Vec(std::initializer_list<double> init) : v_(init) { check_finite(); }
    explicit Vec(std::vector<double> values) : v_(std::move(values)) { check_finite(); }
    static Vec from_span(std::span<const double> s) { return Vec(std::vector<double>(s.begin(), s.end())); }

    int size() const { return static_cast<int>(v_.size()); }
    double operator[](int i) const { return v_[static_cast<size_t>(i)]; }
    double& operator[](int i) { return v_[static_cast<size_t>(i)]; }
    const double* data() const { return v_.data(); }
    double* data() { return v_.data(); }
    const std::vector<double>& values() const { return v_; }
    std::span<const double> span() const { return {v_.data(), v_.size()}; }

    bool finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double dot(const Vec& o) const {
        same_shape(o);
        double s = 0.0;
        for (int i = 0; i < size(); ++i) s += v_[i] * o.v_[i];
        return s;
    }

    double norm() const { return std::sqrt(this->dot(*this)); }

    Vec& operator+=(const Vec& o) {
        same_shape(o);
        for (int i = 0; i < size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        same_shape(o);
        for (int i = 0; i < size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    Vec& operator*=(double c) {
        for (double& x : v_) x *= c;
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(double c, Vec a) { return a *= c; }
    friend bool operator==(const Vec& a, const Vec& b) { return a.v_ == b.v_; }

private:
    void check_finite() const {
        if (!finite()) throw DomainError("Vec: non-finite element");
    }
    void same_shape(const Vec& o) const {
        if (size() != o.size()) throw ShapeError("Vec: length mismatch");
    }

    std::vector<double> v_;
};

// Dense row-major matrix.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, 0.0) {}
    Mat(int rows, int cols, std::vector<double> values)
        : rows_(rows), cols_(cols), a_(std::move(values)) {
        if (static_cast<size_t>(rows_) * cols_ != a_.size())
            throw ShapeError("Mat: value count does not match shape");
        for (double x : a_)
            if (!std::isfinite(x)) throw DomainError("Mat: non-finite element");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double at(int r, int c) const { return a_[static_cast<size_t>(r) * cols_ + c]; }
    double& at(int r, int c) { return a_[static_cast<size_t>(r) * cols_ + c]; }
    const double* data() const { return a_.data(); }
    double* data() { return a_.data(); }

    // y = A x
    Vec operator*(const Vec& x) const {
        if (x.size() != cols_) throw ShapeError("Mat*Vec: dimension mismatch");
        Vec y(rows_);
        for (int r = 0; r < rows_; ++r) {
            double s = 0.0;
            const double* row = a_.data() + static_cast<size_t>(r) * cols_;
            for (int c = 0; c < cols_; ++c) s += row[c] * x[c];
            y[r] = s;
        }
        return y;
    }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.a_ == b.a_;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

} // namespace hapnet
