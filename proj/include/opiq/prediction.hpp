// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "opiq/scale.hpp"

namespace opiq {

// Full output of the prediction network for one image: the memory-branch
// and algorithmic-branch distributions, their mixture, and the scalar
// readouts derived from the mixture.
struct QualityPrediction {
  OpinionDistribution d_mem;
  OpinionDistribution d_alg;
  OpinionDistribution d_p;
  double mos_p = 0.0;
  double sos_p = 0.0;
};

}  // namespace opiq
