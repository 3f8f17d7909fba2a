#include "as2/kernels.hpp"

#include <algorithm>
#include <cmath>

// Bit-exactness rule: for each output element, contributions are added in
// increasing k order in every implementation. The parallel loops split work
// across whole output rows only, so the arithmetic per element is the same
// regardless of thread count.

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr std::size_t kMmGrain = 1 << 15;      // madds below which omp is skipped
constexpr std::size_t kEwGrain = 1 << 14;

inline double gelu_one(double x) {
  double u = kGeluC * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad_one(double x) {
  double x2 = x * x;
  double u = kGeluC * (x + 0.044715 * x * x2);
  double t = std::tanh(u);
  double du = kGeluC * (1.0 + 3.0 * 0.044715 * x2);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

inline void layer_norm_row(const double* xr, const double* gamma,
                           const double* beta, double eps, double* yr,
                           double* mean, double* rstd, std::size_t cols,
                           std::size_t i) {
  double m = 0.0;
  for (std::size_t j = 0; j < cols; ++j) m += xr[j];
  m /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    double d = xr[j] - m;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  double r = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < cols; ++j)
    yr[j] = (xr[j] - m) * r * gamma[j] + beta[j];
  mean[i] = m;
  rstd[i] = r;
}

inline void softmax_row(const double* xr, double* yr, std::size_t cols) {
  double mx = xr[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    yr[j] = std::exp(xr[j] - mx);
    sum += yr[j];
  }
  double inv = 1.0 / sum;
  for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
}

}  // namespace

namespace as2::ref {

void mm_nn(const double* a, const double* b, double* c, std::size_t n,
           std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      c[i * m + j] = acc;
    }
}

void mm_nt(const double* a, const double* b, double* c, std::size_t n,
           std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * m + j] = acc;
    }
}

void mm_tn(const double* a, const double* b, double* c, std::size_t n,
           std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * n + i] * b[p * m + j];
      c[i * m + j] = acc;
    }
}

void gelu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_one(x[i]);
}

void layer_norm(const double* x, const double* gamma, const double* beta,
                double eps, double* y, double* mean, double* rstd,
                std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    layer_norm_row(x + i * cols, gamma, beta, eps, y + i * cols, mean, rstd,
                   cols, i);
}

void softmax_rows(const double* x, double* y, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    softmax_row(x + i * cols, y + i * cols, cols);
}

}  // namespace as2::ref

namespace as2::par {

void mm_nn(const double* a, const double* b, double* c, std::size_t n,
           std::size_t k, std::size_t m) {
  const bool big = n * k * m >= kMmGrain && n > 1;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double* cr = c + i * m;
    const double* ar = a + i * k;
    for (std::size_t j = 0; j < m; ++j) cr[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      const double* br = b + p * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
    }
  }
}

void mm_nt(const double* a, const double* b, double* c, std::size_t n,
           std::size_t k, std::size_t m) {
  const bool big = n * k * m >= kMmGrain && n > 1;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const double* ar = a + i * k;
    double* cr = c + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      cr[j] = acc;
    }
  }
}

void mm_tn(const double* a, const double* b, double* c, std::size_t n,
           std::size_t k, std::size_t m) {
  const bool big = n * k * m >= kMmGrain && n > 1;
#pragma omp parallel for schedule(static) if (big)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    double* cr = c + i * m;
    for (std::size_t j = 0; j < m; ++j) cr[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * n + i];
      const double* br = b + p * m;
      for (std::size_t j = 0; j < m; ++j) cr[j] += av * br[j];
    }
  }
}

void gelu(const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    y[i] = gelu_one(x[i]);
}

void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n >= kEwGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
    dx[i] = dy[i] * gelu_grad_one(x[i]);
}

void layer_norm(const double* x, const double* gamma, const double* beta,
                double eps, double* y, double* mean, double* rstd,
                std::size_t rows, std::size_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols >= kEwGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    layer_norm_row(x + i * cols, gamma, beta, eps, y + i * cols, mean, rstd,
                   cols, static_cast<std::size_t>(i));
}

void softmax_rows(const double* x, double* y, std::size_t rows,
                  std::size_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols >= kEwGrain)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    softmax_row(x + i * cols, y + i * cols, cols);
}

}  // namespace as2::par
