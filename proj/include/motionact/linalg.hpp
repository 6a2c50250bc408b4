#pragma once

#include "motionact/tensor.hpp"

namespace motionact {

struct EigResult {
  Tensor values;   // [n], ascending
  Tensor vectors;  // [n,n], column i pairs with values[i]
};

// Cyclic Jacobi rotations; intended for the symmetric matrices that show up
// in covariance work (metric feature dimensions, <= a few hundred).
// Throws if S is not symmetric.
EigResult sym_eig(const Tensor& s);

// Tr((S1*S2)^{1/2}) for symmetric PSD inputs, computed through the
// eigenvalues of S1^{1/2} * S2 * S1^{1/2}. Eigenvalues in [-1e-8, 0) are
// clamped to zero; anything more negative is an error.
double sqrtm_trace(const Tensor& s1, const Tensor& s2);

}  // namespace motionact
