// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Repeated random train/test partitioning. Each repeat shuffles with its own
// seeded stream, so the whole plan is a pure function of (n, seed).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "opiq/error.hpp"
#include "opiq/rng.hpp"

namespace opiq {

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  int num_repeats = 10;
  double train_fraction = 0.8;
  std::vector<Split> splits;

  // Order-sensitive digest of one split, used to prove that ablation
  // variants ran on identical data.
  std::uint64_t split_hash(int k) const {
    const Split& s = splits.at(static_cast<std::size_t>(k));
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL;
      h *= 0x100000001b3ULL;
    };
    for (int i : s.train) mix(static_cast<std::uint64_t>(i));
    mix(0xffffffffffffffffULL);
    for (int i : s.test) mix(static_cast<std::uint64_t>(i));
    return h;
  }
};

inline SplitPlan make_splits(int n, std::uint64_t seed, int num_repeats = 10,
                             double train_fraction = 0.8) {
  require(n >= 5, ErrorKind::ConfigError,
          "need at least 5 entries to build splits");
  require(num_repeats >= 1, ErrorKind::ConfigError,
          "need at least one repeat");
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::ConfigError,
          "train fraction must be in (0, 1)");
  const int n_train =
      static_cast<int>(std::llround(train_fraction * static_cast<double>(n)));
  require(n_train >= 1 && n_train < n, ErrorKind::ConfigError,
          "train fraction leaves an empty partition");

  SplitPlan plan;
  plan.seed = seed;
  plan.num_repeats = num_repeats;
  plan.train_fraction = train_fraction;
  plan.splits.reserve(static_cast<std::size_t>(num_repeats));
  for (int k = 0; k < num_repeats; ++k) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed + static_cast<std::uint64_t>(k));
    rng.shuffle(order);
    Split split;
    split.train.assign(order.begin(), order.begin() + n_train);
    split.test.assign(order.begin() + n_train, order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    plan.splits.push_back(std::move(split));
  }
  return plan;
}

}  // namespace opiq
