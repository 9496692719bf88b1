// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "opiq/ablation.hpp"
#include "opiq/autodiff.hpp"
#include "opiq/backbone.hpp"
#include "opiq/checkpoint.hpp"
#include "opiq/config.hpp"
#include "opiq/error.hpp"
#include "opiq/evaluate.hpp"
#include "opiq/harness.hpp"
#include "opiq/image.hpp"
#include "opiq/losses.hpp"
#include "opiq/manifest.hpp"
#include "opiq/metrics.hpp"
#include "opiq/network.hpp"
#include "opiq/prediction.hpp"
#include "opiq/rating_stats.hpp"
#include "opiq/report.hpp"
#include "opiq/rng.hpp"
#include "opiq/scale.hpp"
#include "opiq/splits.hpp"
#include "opiq/synthetic.hpp"
#include "opiq/train.hpp"
