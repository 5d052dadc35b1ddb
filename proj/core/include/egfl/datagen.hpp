// Copyright 2026 The egfl authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EGFL_DATAGEN_HPP_
#define EGFL_DATAGEN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egfl/model.hpp"

namespace egfl {

inline const std::vector<std::string> kFeatureNames = {"prb", "latency_ms",
                                                       "channel_quality_db"};

// Traffic profile of one slice family. Base stations draw their Poisson
// intensity from [intensity_lo, intensity_hi], which is what makes the
// per-BS datasets non-IID. kappa and tau are calibrated at generation time
// so the pooled drop rate hits target_positive_rate.
struct SliceProfile {
  std::string name;
  double intensity_lo = 0.0, intensity_hi = 0.0;  // arrivals/s
  double prb_lo = 0.0, prb_hi = 0.0;              // resource blocks
  double snr_lo = 0.0, snr_hi = 0.0;              // dB
  double latency_base_ms = 0.0;
  double latency_load_coeff = 0.0;
  double target_positive_rate = 0.2;
  // Filled by generate():
  double kappa = 0.0;
  double tau = 0.0;
};

// eMBB / uRLLC / mMTC defaults; slices beyond three cycle through them.
std::vector<SliceProfile> default_slice_profiles();

struct Standardization {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

struct DatasetGrid {
  int num_bs = 0;      // K
  int num_slices = 0;  // N
  int samples = 0;     // D per client
  std::uint64_t seed = 0;
  std::vector<LocalDataset> clients;           // index k * num_slices + n
  std::vector<SliceProfile> profiles;          // per slice, calibrated
  std::vector<Standardization> standardization;  // per slice

  const LocalDataset& at(int k, int n) const { return clients[k * num_slices + n]; }
  LocalDataset& at(int k, int n) { return clients[k * num_slices + n]; }
};

// Deterministic K x N grid of standardized per-client datasets. Throws
// GenerationError when a client stays single-class after 100 resamples.
DatasetGrid generate(std::uint64_t seed, int num_bs, int num_slices, int samples);
DatasetGrid generate(std::uint64_t seed, int num_bs, int num_slices, int samples,
                     std::vector<SliceProfile> profiles);

// One CSV per client (header prb,latency_ms,channel_quality_db,drop; values
// in standardized units) plus manifest.json with seed, profiles, calibrated
// kappa/tau and the standardization parameters.
void export_grid(const DatasetGrid& grid, const std::filesystem::path& dir);
DatasetGrid import_grid(const std::filesystem::path& dir);

std::string client_csv_name(int k, int n);

}  // namespace egfl

#endif  // EGFL_DATAGEN_HPP_
