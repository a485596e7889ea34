#include "wgsef/tensor.hpp"

#include <functional>
#include <numeric>

#include "wgsef/errors.hpp"

namespace wgsef {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_size(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape_size(shape) != data.size()) {
    throw Error(Errc::ShapeMismatch, "shape " + shape_string(shape) + " does not hold " +
                                         std::to_string(data.size()) + " values");
  }
}

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    double* c = C + i * N;
    for (std::size_t p = 0; p < K; ++p) {
      const double a = A[i * K + p];
      if (a == 0.0) continue;
      const double* b = B + p * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    for (std::size_t j = 0; j < N; ++j) {
      const double* b = B + j * K;
      double s = 0.0;
      for (std::size_t p = 0; p < K; ++p) s += a[p] * b[p];
      C[i * N + j] += s;
    }
  }
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B, double* C) {
  for (std::size_t p = 0; p < K; ++p) {
    const double* a = A + p * M;
    const double* b = B + p * N;
    for (std::size_t i = 0; i < M; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      double* c = C + i * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += ai * b[j];
    }
  }
}

}  // namespace wgsef
