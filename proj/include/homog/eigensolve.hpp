#pragma once

#include <cstdint>
#include <functional>

#include "homog/types.hpp"

namespace homog {

// Hermitian generalized eigenproblems A x = lambda B x with B positive
// definite. Sparse paths run shift-invert Lanczos in the B inner product with
// full reorthogonalization; small problems fall back to a dense solver.

struct EigOptions {
  double tol = 1e-10;        // relative residual ||Ax-λBx|| / (||Ax||+|λ|||Bx||)
  int max_dim = 0;           // Krylov dimension cap; 0 = automatic
  int dense_threshold = 400; // below this, solve densely
  std::uint64_t seed = 0x9E3779B97F4A7C15ull;
};

struct EigResult {
  RVec values;  // ascending
  Mat vectors;  // B-orthonormal columns matching values
};

// Smallest `count` eigenpairs. `sigma` must lie strictly below the spectrum
// (0 works for positive definite pencils, negative values for semidefinite).
EigResult smallest_eigenpairs(const SpMat& A, const SpMat& B, int count,
                              double sigma, const EigOptions& opts = {});

// All eigenpairs with eigenvalue in [lo, hi], found by adaptive multi-shift
// shift-invert sweeps.
EigResult eigenpairs_in_window(const SpMat& A, const SpMat& B, double lo,
                               double hi, const EigOptions& opts = {});

// Dense solve of the full pencil (A Hermitian, B HPD), ascending.
EigResult dense_generalized(const Mat& A, const Mat& B);

// Nearest eigenvalue to the real shift sigma, estimated from `steps` Lanczos
// iterations of a caller-supplied shift-inverted apply y = (A - sigma B)^{-1} B x.
double nearest_eigenvalue(const std::function<Vec(const Vec&)>& shiftinv_apply,
                          const SpMat& B, double sigma, int steps,
                          std::uint64_t seed = 0x9E3779B97F4A7C15ull);

}  // namespace homog
