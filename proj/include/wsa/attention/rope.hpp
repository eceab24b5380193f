// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "wsa/core/tensor.hpp"

namespace wsa::attention {

// Rotary position embedding over the last two axes [... x N x D]: the pair
// (x[2t], x[2t+1]) at position p is rotated by p * base^(-2t/D). With
// inverse=true the rotation angle is negated, which is also the adjoint.
template <class Real>
BasicTensor<Real> rope_rotate(const BasicTensor<Real>& x, double base = 10000.0, bool inverse = false);

}  // namespace wsa::attention
