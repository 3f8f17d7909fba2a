#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. Two implementations share each
// signature: as2::ref is the plain serial reference (the test oracle),
// as2::par is the OpenMP production path. Both accumulate every output
// element in the same index order, so their results are bit-identical and
// independent of the thread count.

namespace as2::ref {

// C[n x m] = A[n x k] * B[k x m]
void mm_nn(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m);
// C[n x m] = A[n x k] * B[m x k]^T
void mm_nt(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m);
// C[n x m] = A[k x n]^T * B[k x m]
void mm_tn(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m);

void gelu(const double* x, double* y, std::size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n);

// per-row normalization; mean/rstd are saved for the backward pass
void layer_norm(const double* x, const double* gamma, const double* beta,
                double eps, double* y, double* mean, double* rstd,
                std::size_t rows, std::size_t cols);

// row-wise softmax with max subtraction
void softmax_rows(const double* x, double* y, std::size_t rows,
                  std::size_t cols);

}  // namespace as2::ref

namespace as2::par {

void mm_nn(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m);
void mm_nt(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m);
void mm_tn(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m);

void gelu(const double* x, double* y, std::size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n);

void layer_norm(const double* x, const double* gamma, const double* beta,
                double eps, double* y, double* mean, double* rstd,
                std::size_t rows, std::size_t cols);

void softmax_rows(const double* x, double* y, std::size_t rows,
                  std::size_t cols);

}  // namespace as2::par
