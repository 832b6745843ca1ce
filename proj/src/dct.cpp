#include "dct.hpp"

#include <cmath>
#include <numbers>

namespace l2t {

std::vector<double> dct_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      basis[k * n + i] = scale * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    }
  }
  return basis;
}

void dct2(std::span<const double> row_basis, std::span<const double> col_basis, int rows, int cols,
          std::span<const double> in, std::span<double> out) {
  // tmp = in · Cᵀ  (transform along each row)
  std::vector<double> tmp(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int y = 0; y < rows; ++y) {
    for (int v = 0; v < cols; ++v) {
      double acc = 0.0;
      for (int x = 0; x < cols; ++x) acc += in[y * cols + x] * col_basis[v * cols + x];
      tmp[y * cols + v] = acc;
    }
  }
  // out = R · tmp
  for (int u = 0; u < rows; ++u) {
    for (int v = 0; v < cols; ++v) {
      double acc = 0.0;
      for (int y = 0; y < rows; ++y) acc += row_basis[u * rows + y] * tmp[y * cols + v];
      out[u * cols + v] = acc;
    }
  }
}

void idct2(std::span<const double> row_basis, std::span<const double> col_basis, int rows, int cols,
           std::span<const double> in, std::span<double> out) {
  // tmp = Rᵀ · in
  std::vector<double> tmp(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int y = 0; y < rows; ++y) {
    for (int v = 0; v < cols; ++v) {
      double acc = 0.0;
      for (int u = 0; u < rows; ++u) acc += row_basis[u * rows + y] * in[u * cols + v];
      tmp[y * cols + v] = acc;
    }
  }
  // out = tmp · C
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (int v = 0; v < cols; ++v) acc += tmp[y * cols + v] * col_basis[v * cols + x];
      out[y * cols + x] = acc;
    }
  }
}

}  // namespace l2t
