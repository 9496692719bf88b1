// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale synthetic dataset: procedurally textured images degraded by a
// blur radius and noise amplitude that are deterministic functions of the
// target quality, so the ground-truth MOS is known by construction. The
// manifest exposes only the labels of the requested database category; the
// full label set is kept as a hidden oracle for tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "opiq/error.hpp"
#include "opiq/image.hpp"
#include "opiq/manifest.hpp"
#include "opiq/rating_stats.hpp"
#include "opiq/rng.hpp"
#include "opiq/scale.hpp"

namespace opiq {

struct SyntheticOracle {
  std::vector<double> true_mos;
  std::vector<double> true_sos;
  std::vector<std::vector<double>> true_dos;
  std::vector<double> blur_sigma;
  std::vector<double> noise_amp;
};

struct SyntheticDataset {
  DatasetManifest manifest;
  SyntheticOracle oracle;
};

namespace detail {

// Base texture: a few sinusoidal gratings over a mid-gray bed, with at least
// one high-frequency component so blurring is measurable.
inline Image synth_pattern(int size, Rng& rng) {
  Image img(size, size);
  double base[3];
  for (double& b : base) b = rng.uniform(0.35, 0.65);
  struct Grating {
    double fx, fy, phase, amp, w[3];
  };
  std::vector<Grating> gratings;
  for (int g = 0; g < 5; ++g) {
    Grating grating;
    const double angle = rng.uniform(0.0, M_PI);
    const double freq = (g < 3) ? rng.uniform(2.0, 8.0) : rng.uniform(10.0, 22.0);
    grating.fx = 2.0 * M_PI * freq * std::cos(angle) / size;
    grating.fy = 2.0 * M_PI * freq * std::sin(angle) / size;
    grating.phase = rng.uniform(0.0, 2.0 * M_PI);
    grating.amp = rng.uniform(0.06, 0.16);
    for (double& w : grating.w) w = rng.uniform(0.3, 1.0);
    gratings.push_back(grating);
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double v = base[ch];
        for (const Grating& g : gratings) {
          v += g.amp * g.w[ch] * std::sin(g.fx * x + g.fy * y + g.phase);
        }
        img.at(x, y, ch) = v;
      }
    }
  }
  img.clamp01();
  return img;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic_dataset(
    int n, const QualityScale& scale, LabelCategory category,
    std::uint64_t seed, double a_true, const std::filesystem::path& out_dir,
    int image_size = 96) {
  require(n >= 1, ErrorKind::ConfigError, "need at least one sample");
  require(a_true > 0.0, ErrorKind::ConfigError, "a_true must be positive");
  std::filesystem::create_directories(out_dir);

  SyntheticDataset data;
  data.manifest.name = "synthetic";
  data.manifest.scale = scale;
  data.manifest.category = category;
  data.manifest.base_dir = out_dir;

  const double lo = scale.range_start();
  const double hi = scale.range_end();
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));

    // Quality drives the degradation strength; both stay invertible.
    const double u = rng.uniform(0.05, 0.95);
    const double mos = lo + u * (hi - lo);
    const double blur_sigma = 2.5 * std::pow(1.0 - u, 1.2);
    const double noise_amp = 0.22 * std::pow(1.0 - u, 1.2);

    const double sos_clean = expected_sos(mos, scale, a_true);
    const double sos = sos_clean * (1.0 + 0.05 * rng.uniform(-1.0, 1.0));
    const OpinionDistribution dos = gaussian_dos(mos, sos, scale);

    Image img = detail::synth_pattern(image_size, rng);
    img = gaussian_blur(img, blur_sigma);
    if (noise_amp > 0.0) {
      for (double& v : img.pixels) v += noise_amp * rng.normal();
      img.clamp01();
    }
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.ppm", i);
    write_ppm(img, out_dir / name);

    ManifestEntry entry;
    entry.image_path = name;
    switch (category) {
      case LabelCategory::DosAvailable:
        entry.dos = dos.probs();
        entry.mos = mos_of(dos);  // manifest consistency: mean of the dos
        break;
      case LabelCategory::MosSosAvailable:
        entry.mos = mos;
        entry.sos = sos;
        break;
      case LabelCategory::MosOnly:
        entry.mos = mos;
        break;
    }
    data.manifest.entries.push_back(std::move(entry));

    data.oracle.true_mos.push_back(mos);
    data.oracle.true_sos.push_back(sos);
    data.oracle.true_dos.push_back(dos.probs());
    data.oracle.blur_sigma.push_back(blur_sigma);
    data.oracle.noise_amp.push_back(noise_amp);
  }
  return data;
}

inline void save_oracle(const SyntheticOracle& oracle,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError,
          "cannot write oracle file " + path.string());
  for (std::size_t i = 0; i < oracle.true_mos.size(); ++i) {
    json j{{"index", i},
           {"mos", oracle.true_mos[i]},
           {"sos", oracle.true_sos[i]},
           {"dos", oracle.true_dos[i]},
           {"blur_sigma", oracle.blur_sigma[i]},
           {"noise_amp", oracle.noise_amp[i]}};
    out << j.dump() << "\n";
  }
}

}  // namespace opiq
