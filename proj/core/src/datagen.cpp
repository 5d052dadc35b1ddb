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

#include "egfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "egfl/io.hpp"
#include "egfl/rng.hpp"

namespace egfl {

namespace {

constexpr int kResampleAttempts = 100;

// Raw per-sample draws before calibration turns them into features/labels.
struct RawClient {
  std::vector<double> demand;
  std::vector<double> prb;
  std::vector<double> snr;
  std::vector<double> noise;  // standard normal, scaled into latency later
};

double spectral_efficiency(double snr_db) {
  return std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

RawClient draw_raw(const SliceProfile& prof, int samples, std::mt19937_64& rng) {
  RawClient raw;
  raw.demand.resize(samples);
  raw.prb.resize(samples);
  raw.snr.resize(samples);
  raw.noise.resize(samples);
  std::uniform_real_distribution<double> intensity_dist(prof.intensity_lo, prof.intensity_hi);
  std::uniform_real_distribution<double> prb_dist(prof.prb_lo, prof.prb_hi);
  std::uniform_real_distribution<double> snr_dist(prof.snr_lo, prof.snr_hi);
  std::normal_distribution<double> noise_dist(0.0, 1.0);
  const double intensity = intensity_dist(rng);
  for (int i = 0; i < samples; ++i) {
    // Time-varying Poisson intensity across the sample window.
    const double mean =
        intensity * (1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * i / samples));
    std::poisson_distribution<long> demand_dist(std::max(mean, 1e-9));
    raw.demand[i] = static_cast<double>(demand_dist(rng));
    raw.prb[i] = prb_dist(rng);
    raw.snr[i] = snr_dist(rng);
    raw.noise[i] = noise_dist(rng);
  }
  return raw;
}

double median(std::vector<double> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

bool drop_label(double demand, double capacity, double tau) {
  return demand > capacity * tau;
}

double pooled_positive_rate(const std::vector<RawClient*>& pool, double kappa, double tau) {
  std::size_t positives = 0, total = 0;
  for (const RawClient* c : pool) {
    for (std::size_t i = 0; i < c->demand.size(); ++i) {
      const double cap = c->prb[i] * spectral_efficiency(c->snr[i]) * kappa;
      positives += drop_label(c->demand[i], cap, tau);
      ++total;
    }
  }
  return static_cast<double>(positives) / static_cast<double>(total);
}

}  // namespace

std::vector<SliceProfile> default_slice_profiles() {
  // Latency carries a deliberately faint load signal (load coefficient on
  // the order of the noise sigma, 5% of base) so capacity-side features
  // stay the dominant drop predictors.
  std::vector<SliceProfile> profiles(3);
  profiles[0] = {"eMBB", 70.0, 130.0, 60.0, 160.0, 5.0, 25.0, 20.0, 0.4, 0.20, 0.0, 0.0};
  profiles[1] = {"uRLLC", 40.0, 90.0, 30.0, 90.0, 10.0, 28.0, 4.0, 0.08, 0.20, 0.0, 0.0};
  profiles[2] = {"mMTC", 90.0, 180.0, 20.0, 70.0, 0.0, 18.0, 35.0, 0.7, 0.20, 0.0, 0.0};
  return profiles;
}

DatasetGrid generate(std::uint64_t seed, int num_bs, int num_slices, int samples) {
  return generate(seed, num_bs, num_slices, samples, default_slice_profiles());
}

DatasetGrid generate(std::uint64_t seed, int num_bs, int num_slices, int samples,
                     std::vector<SliceProfile> base_profiles) {
  if (num_bs < 1 || num_slices < 1 || samples < 1) {
    throw ValidationError("generate: K, N and D must be >= 1");
  }
  if (base_profiles.empty()) throw ValidationError("generate: no slice profiles");

  DatasetGrid grid;
  grid.num_bs = num_bs;
  grid.num_slices = num_slices;
  grid.samples = samples;
  grid.seed = seed;
  grid.clients.resize(static_cast<std::size_t>(num_bs) * num_slices);
  grid.profiles.resize(num_slices);
  grid.standardization.resize(num_slices);

  for (int n = 0; n < num_slices; ++n) {
    SliceProfile prof = base_profiles[n % base_profiles.size()];
    if (!(prof.intensity_lo > 0.0 && prof.intensity_hi > prof.intensity_lo &&
          prof.prb_hi > prof.prb_lo && prof.prb_lo > 0.0 && prof.snr_hi > prof.snr_lo)) {
      throw ValidationError("generate: degenerate profile ranges for slice " +
                            std::to_string(n));
    }
    if (!(prof.target_positive_rate >= 0.05 && prof.target_positive_rate <= 0.35)) {
      throw ValidationError("generate: target positive rate outside [0.05, 0.35]");
    }

    std::vector<RawClient> raw(num_bs);
    std::vector<RawClient*> pool(num_bs);
    for (int k = 0; k < num_bs; ++k) {
      auto rng = make_rng(seed, {kStreamData, static_cast<std::uint64_t>(k),
                                 static_cast<std::uint64_t>(n)});
      raw[k] = draw_raw(prof, samples, rng);
      pool[k] = &raw[k];
    }

    // kappa puts median capacity on the median demand scale; tau is then
    // bisected to the pooled imbalance target (the rate is nonincreasing
    // in tau).
    std::vector<double> demands, capacities_raw;
    demands.reserve(static_cast<std::size_t>(num_bs) * samples);
    capacities_raw.reserve(demands.capacity());
    for (const RawClient& c : raw) {
      for (std::size_t i = 0; i < c.demand.size(); ++i) {
        demands.push_back(c.demand[i]);
        capacities_raw.push_back(c.prb[i] * spectral_efficiency(c.snr[i]));
      }
    }
    const double med_capacity = median(capacities_raw);
    if (!(med_capacity > 0.0)) throw GenerationError("generate: zero median capacity");
    prof.kappa = std::max(median(demands), 1.0) / med_capacity;

    double lo = 1e-3, hi = 1e3;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pooled_positive_rate(pool, prof.kappa, mid) > prof.target_positive_rate) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    prof.tau = 0.5 * (lo + hi);

    const double rate = pooled_positive_rate(pool, prof.kappa, prof.tau);
    if (rate < 0.03 || rate > 0.45) {
      throw GenerationError("generate: calibration missed the imbalance target for slice " +
                            std::to_string(n) + " (rate " + format_double(rate) + ")");
    }

    // Materialize features/labels; resample single-class clients with the
    // calibrated kappa/tau held fixed.
    auto materialize = [&](const RawClient& c, LocalDataset& out) {
      out.features.assign(c.demand.size(), std::vector<double>(3));
      out.labels.assign(c.demand.size(), 0);
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < c.demand.size(); ++i) {
        const double cap = c.prb[i] * spectral_efficiency(c.snr[i]) * prof.kappa;
        const double load = c.demand[i] / std::max(cap, 1e-12);
        const double latency = prof.latency_base_ms + prof.latency_load_coeff * load +
                               0.05 * prof.latency_base_ms * c.noise[i];
        out.features[i][0] = c.prb[i];
        out.features[i][1] = latency;
        out.features[i][2] = c.snr[i];
        const bool y = drop_label(c.demand[i], cap, prof.tau);
        out.labels[i] = y ? 1 : 0;
        (y ? pos : neg) = true;
      }
      return pos && neg;
    };

    for (int k = 0; k < num_bs; ++k) {
      LocalDataset& client = grid.at(k, n);
      bool ok = materialize(raw[k], client);
      for (int attempt = 1; !ok && attempt <= kResampleAttempts; ++attempt) {
        auto rng = make_rng(seed, {kStreamResample, static_cast<std::uint64_t>(k),
                                   static_cast<std::uint64_t>(n),
                                   static_cast<std::uint64_t>(attempt)});
        const RawClient redraw = draw_raw(prof, samples, rng);
        ok = materialize(redraw, client);
      }
      if (!ok) {
        throw GenerationError("generate: client (" + std::to_string(k) + "," +
                              std::to_string(n) + ") stayed single-class after " +
                              std::to_string(kResampleAttempts) + " resamples");
      }
    }

    // Per-slice z-scoring over the pooled final data (population moments,
    // so the standardized variance is exactly one).
    Standardization& stz = grid.standardization[n];
    const double total = static_cast<double>(num_bs) * samples;
    for (int j = 0; j < 3; ++j) {
      double mean = 0.0;
      for (int k = 0; k < num_bs; ++k) {
        for (const auto& row : grid.at(k, n).features) mean += row[j];
      }
      mean /= total;
      double var = 0.0;
      for (int k = 0; k < num_bs; ++k) {
        for (const auto& row : grid.at(k, n).features) {
          var += (row[j] - mean) * (row[j] - mean);
        }
      }
      var /= total;
      if (!(var > 0.0)) throw GenerationError("generate: constant feature column");
      stz.mean[j] = mean;
      stz.stddev[j] = std::sqrt(var);
    }
    for (int k = 0; k < num_bs; ++k) {
      for (auto& row : grid.at(k, n).features) {
        for (int j = 0; j < 3; ++j) row[j] = (row[j] - stz.mean[j]) / stz.stddev[j];
      }
    }
    grid.profiles[n] = prof;
  }
  return grid;
}

std::string client_csv_name(int k, int n) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "bs%03d_slice%d.csv", k, n);
  return buf;
}

namespace {

nlohmann::ordered_json profile_to_json(const SliceProfile& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["intensity_lo"] = p.intensity_lo;
  j["intensity_hi"] = p.intensity_hi;
  j["prb_lo"] = p.prb_lo;
  j["prb_hi"] = p.prb_hi;
  j["snr_lo"] = p.snr_lo;
  j["snr_hi"] = p.snr_hi;
  j["latency_base_ms"] = p.latency_base_ms;
  j["latency_load_coeff"] = p.latency_load_coeff;
  j["target_positive_rate"] = p.target_positive_rate;
  j["kappa"] = p.kappa;
  j["tau"] = p.tau;
  return j;
}

SliceProfile profile_from_json(const nlohmann::json& j) {
  SliceProfile p;
  p.name = j.at("name").get<std::string>();
  p.intensity_lo = j.at("intensity_lo").get<double>();
  p.intensity_hi = j.at("intensity_hi").get<double>();
  p.prb_lo = j.at("prb_lo").get<double>();
  p.prb_hi = j.at("prb_hi").get<double>();
  p.snr_lo = j.at("snr_lo").get<double>();
  p.snr_hi = j.at("snr_hi").get<double>();
  p.latency_base_ms = j.at("latency_base_ms").get<double>();
  p.latency_load_coeff = j.at("latency_load_coeff").get<double>();
  p.target_positive_rate = j.at("target_positive_rate").get<double>();
  p.kappa = j.at("kappa").get<double>();
  p.tau = j.at("tau").get<double>();
  return p;
}

std::string client_to_csv(const LocalDataset& data) {
  std::ostringstream os;
  os << "prb,latency_ms,channel_quality_db,drop\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << format_double(data.features[i][0]) << ',' << format_double(data.features[i][1]) << ','
       << format_double(data.features[i][2]) << ',' << data.labels[i] << '\n';
  }
  return os.str();
}

LocalDataset client_from_csv(const std::string& text, const std::string& where) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  LocalDataset data;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (lineno == 1) {
      if (cells != std::vector<std::string>{"prb", "latency_ms", "channel_quality_db", "drop"}) {
        throw ParseError(where + ": unexpected header '" + line + "'", lineno);
      }
      continue;
    }
    if (cells.size() != 4) {
      throw ParseError(where + ": expected 4 columns, got " + std::to_string(cells.size()),
                       lineno);
    }
    std::vector<double> row(3);
    for (int j = 0; j < 3; ++j) row[j] = parse_double(cells[j], lineno);
    const long label = parse_long(cells[3], lineno);
    if (label != 0 && label != 1) throw ParseError(where + ": label outside {0,1}", lineno);
    data.features.push_back(std::move(row));
    data.labels.push_back(static_cast<int>(label));
  }
  if (data.size() == 0) throw ParseError(where + ": no data rows");
  return data;
}

}  // namespace

void export_grid(const DatasetGrid& grid, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["kind"] = "egfl-dataset";
  manifest["seed"] = grid.seed;
  manifest["num_bs"] = grid.num_bs;
  manifest["num_slices"] = grid.num_slices;
  manifest["samples"] = grid.samples;
  manifest["feature_names"] = kFeatureNames;
  auto profiles = nlohmann::ordered_json::array();
  for (const auto& p : grid.profiles) profiles.push_back(profile_to_json(p));
  manifest["profiles"] = profiles;
  auto stz = nlohmann::ordered_json::array();
  for (const auto& s : grid.standardization) {
    nlohmann::ordered_json e;
    e["mean"] = s.mean;
    e["stddev"] = s.stddev;
    stz.push_back(e);
  }
  manifest["standardization"] = stz;

  nlohmann::ordered_json files;  // insertion order: k-major, matching reads
  for (int k = 0; k < grid.num_bs; ++k) {
    for (int n = 0; n < grid.num_slices; ++n) {
      const std::string name = client_csv_name(k, n);
      const std::string csv = client_to_csv(grid.at(k, n));
      write_file(dir / name, csv);
      files[name] = fnv1a_hex(csv);
    }
  }
  manifest["files"] = files;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetGrid import_grid(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  DatasetGrid grid;
  try {
    if (manifest.at("kind").get<std::string>() != "egfl-dataset") {
      throw ParseError(manifest_path.string() + ": not a dataset manifest");
    }
    grid.seed = manifest.at("seed").get<std::uint64_t>();
    grid.num_bs = manifest.at("num_bs").get<int>();
    grid.num_slices = manifest.at("num_slices").get<int>();
    grid.samples = manifest.at("samples").get<int>();
    for (const auto& p : manifest.at("profiles")) grid.profiles.push_back(profile_from_json(p));
    for (const auto& s : manifest.at("standardization")) {
      Standardization stz;
      stz.mean = s.at("mean").get<std::array<double, 3>>();
      stz.stddev = s.at("stddev").get<std::array<double, 3>>();
      grid.standardization.push_back(stz);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  if (grid.num_bs < 1 || grid.num_slices < 1) {
    throw ParseError(manifest_path.string() + ": invalid grid dimensions");
  }
  grid.clients.resize(static_cast<std::size_t>(grid.num_bs) * grid.num_slices);
  for (int k = 0; k < grid.num_bs; ++k) {
    for (int n = 0; n < grid.num_slices; ++n) {
      const std::string name = client_csv_name(k, n);
      LocalDataset client = client_from_csv(read_file(dir / name), name);
      client.validate();
      grid.at(k, n) = std::move(client);
    }
  }
  return grid;
}

}  // namespace egfl
