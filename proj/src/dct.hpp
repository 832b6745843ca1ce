#pragma once

#include <span>
#include <vector>

namespace l2t {

// Orthonormal DCT-II basis of size n, row-major: basis[k * n + i].
// Orthonormality makes the inverse transform the transpose.
std::vector<double> dct_basis(int n);

// 2D orthonormal DCT-II of one rows×cols plane: out = R · in · Cᵀ, with R and C
// the row and column bases.
void dct2(std::span<const double> row_basis, std::span<const double> col_basis, int rows, int cols,
          std::span<const double> in, std::span<double> out);

// Inverse of dct2: out = Rᵀ · in · C.
void idct2(std::span<const double> row_basis, std::span<const double> col_basis, int rows, int cols,
           std::span<const double> in, std::span<double> out);

}  // namespace l2t
