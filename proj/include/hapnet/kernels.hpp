#pragma once

#include <span>

#include "hapnet/vec.hpp"

namespace hapnet {

// Raw numeric kernels shared by the plain vector API and the autodiff tape,
// so both paths compute identical values.
namespace kernels {

// y = (|x|^2 / (1 + |x|^2)) * x / |x|; returns |x|. squash(0) = 0.
double squash(const double* x, int n, double* y);

// max-stabilized; out sums to 1
void softmax(const double* x, int n, double* out);

double dot(const double* a, const double* b, int n);
double norm(const double* x, int n);

// u.v / (|u||v|); 0 if either argument is the zero vector
double cosine(const double* a, const double* b, int n);

// y = W x, W row-major (rows x cols)
void matvec(const double* W, int rows, int cols, const double* x, double* y);

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

} // namespace kernels

// --- public element ops -------------------------------------------------

// Capsule nonlinearity: preserves direction, maps norm to |v|^2/(1+|v|^2) in [0,1).
Vec squash(const Vec& v);

// Probability simplex over logits; DomainError on empty input.
Vec softmax(const Vec& logits);

// In [-1,1]; 0 when either argument is zero. ShapeError on length mismatch.
double cosine_similarity(const Vec& u, const Vec& v);

double leaky_relu(double x, double slope);

} // namespace hapnet
