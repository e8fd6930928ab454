#include "hapnet/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace hapnet {
namespace kernels {

double squash(const double* x, int n, double* y) {
    double nsq = 0.0;
    for (int i = 0; i < n; ++i) nsq += x[i] * x[i];
    if (nsq == 0.0) {
        for (int i = 0; i < n; ++i) y[i] = 0.0;
        return 0.0;
    }
    double nrm = std::sqrt(nsq);
    double scale = nrm / (1.0 + nsq); // (nsq/(1+nsq)) / nrm
    for (int i = 0; i < n; ++i) y[i] = scale * x[i];
    return nrm;
}

void softmax(const double* x, int n, double* out) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - mx);
        sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
}

double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm(const double* x, int n) { return std::sqrt(dot(x, x, n)); }

double cosine(const double* a, const double* b, int n) {
    double na = norm(a, n), nb = norm(b, n);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b, n) / (na * nb);
}

void matvec(const double* W, int rows, int cols, const double* x, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* row = W + static_cast<size_t>(r) * cols;
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += row[c] * x[c];
        y[r] = s;
    }
}

} // namespace kernels

Vec squash(const Vec& v) {
    if (!v.finite()) throw DomainError("squash: non-finite input");
    Vec out(v.size());
    kernels::squash(v.data(), v.size(), out.data());
    return out;
}

Vec softmax(const Vec& logits) {
    if (logits.size() == 0) throw DomainError("softmax: empty input");
    if (!logits.finite()) throw DomainError("softmax: non-finite input");
    Vec out(logits.size());
    kernels::softmax(logits.data(), logits.size(), out.data());
    return out;
}

double cosine_similarity(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) throw ShapeError("cosine_similarity: length mismatch");
    return kernels::cosine(u.data(), v.data(), u.size());
}

double leaky_relu(double x, double slope) {
    if (!std::isfinite(x)) throw DomainError("leaky_relu: non-finite input");
    return kernels::leaky_relu(x, slope);
}

} // namespace hapnet
