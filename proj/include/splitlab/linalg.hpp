#pragma once

#include "splitlab/tensor.hpp"

namespace splitlab {

inline constexpr std::size_t kEigDimCap = 4096;

struct EigResult {
  // Eigenvalues in descending order; row i of eigenvectors is the unit
  // eigenvector mu_i for eigenvalues[i] (row-vector convention).
  std::vector<double> eigenvalues;
  Tensor eigenvectors;
};

// Cyclic Jacobi rotations on a symmetric matrix. Input must be symmetric
// within sym_tol, size bounded by dim_cap.
EigResult sym_eig(const Tensor& s, double sym_tol = 1e-10,
                  std::size_t dim_cap = kEigDimCap);

struct SingularTriple {
  double sigma;
  Tensor left;   // 1-D, unit norm
  Tensor right;  // 1-D, unit norm, M * right = sigma * left
};

SingularTriple top_singular(const Tensor& m);

// Solve X * A = B for symmetric positive definite A (row-vector
// convention), via Cholesky. A is n x n, B is k x n, result k x n.
Tensor solve_spd_right(const Tensor& a, const Tensor& b);

Tensor identity(std::size_t n);

}  // namespace splitlab
