/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "raes/augment.hpp"
#include "raes/corpus.hpp"
#include "raes/encoder.hpp"
#include "raes/error.hpp"

namespace raes {

/// One experiment: data location, rubric group, training schedule,
/// learning-rate groups, augmentation counts, and model dimensions.
struct ExperimentConfig {
  std::string data;
  std::string prompts;
  std::string group = "3-4";
  std::uint64_t seed = 1;
  int epochs = 10;
  // Contrastive term active while epoch < cutoff; -1 means every epoch.
  int epoch_gm_cutoff = -1;
  int batch_size = 16;
  double encoder_lr = 0.02;
  double attention_lr = 0.02;
  double contrastive_lr = 0.02;
  AugmentConfig augment;
  EncoderConfig encoder;
  int k_max = 48;
  int fold = -1;  // -1 trains all five folds
  std::string out_dir = "out";

  int gm_cutoff() const { return epoch_gm_cutoff < 0 ? epochs : epoch_gm_cutoff; }

  /// Contrastive gradients are scaled so their effective step matches the
  /// contrastive learning rate under the attention-group optimizer.
  double gm_scale() const { return contrastive_lr / attention_lr; }

  void validate() const {
    if (data.empty()) throw ConfigError("config: data path is required");
    if (prompts.empty()) throw ConfigError("config: prompts path is required");
    group_by_id(group);  // throws on unknown group
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (gm_cutoff() > epochs) {
      throw ConfigError("config: epoch_gm_cutoff " +
                        std::to_string(epoch_gm_cutoff) + " exceeds epochs " +
                        std::to_string(epochs));
    }
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (encoder_lr <= 0.0 || attention_lr <= 0.0 || contrastive_lr <= 0.0) {
      throw ConfigError("config: learning rates must be > 0");
    }
    if (encoder.window_len < 2) {
      throw ConfigError("config: window_len must be >= 2");
    }
    if (encoder.embed_dim < 2) {
      throw ConfigError("config: embed_dim must be >= 2");
    }
    if (k_max < 1) throw ConfigError("config: k_max must be >= 1");
    if (fold < -1 || fold > 4) {
      throw ConfigError("config: fold must be -1 (all) or 0..4");
    }
    augment.validate();
  }
};

namespace detail {

inline std::string trim_ws(const std::string& s) {
  const std::size_t lo = s.find_first_not_of(" \t\r\n");
  if (lo == std::string::npos) return "";
  const std::size_t hi = s.find_last_not_of(" \t\r\n");
  return s.substr(lo, hi - lo + 1);
}

inline long long parse_ll(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long parsed = 0;
  try {
    parsed = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
  }
  if (used != value.size()) {
    throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
  }
  return parsed;
}

inline double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("config: bad real for " + key + ": '" + value + "'");
  }
  if (used != value.size()) {
    throw ConfigError("config: bad real for " + key + ": '" + value + "'");
  }
  return parsed;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

}  // namespace detail

/// Applies one key=value assignment. Unknown keys are errors.
inline void set_config_key(ExperimentConfig& config, const std::string& key,
                           const std::string& value) {
  using detail::parse_bool;
  using detail::parse_ll;
  using detail::parse_real;
  if (key == "data") {
    config.data = value;
  } else if (key == "prompts") {
    config.prompts = value;
  } else if (key == "group") {
    config.group = value;
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_ll(key, value));
  } else if (key == "epochs") {
    config.epochs = static_cast<int>(parse_ll(key, value));
  } else if (key == "epoch_gm_cutoff") {
    config.epoch_gm_cutoff = static_cast<int>(parse_ll(key, value));
  } else if (key == "batch_size") {
    config.batch_size = static_cast<int>(parse_ll(key, value));
  } else if (key == "encoder_lr") {
    config.encoder_lr = parse_real(key, value);
  } else if (key == "attention_lr") {
    config.attention_lr = parse_real(key, value);
  } else if (key == "contrastive_lr") {
    config.contrastive_lr = parse_real(key, value);
  } else if (key == "swap_count") {
    config.augment.swap_count = static_cast<int>(parse_ll(key, value));
  } else if (key == "distort_count") {
    config.augment.distort_count = static_cast<int>(parse_ll(key, value));
  } else if (key == "distort_rate") {
    config.augment.distort_rate = parse_real(key, value);
  } else if (key == "gm_enabled") {
    config.augment.gm_enabled = parse_bool(key, value);
  } else if (key == "window_len") {
    config.encoder.window_len =
        static_cast<std::size_t>(parse_ll(key, value));
  } else if (key == "embed_dim") {
    config.encoder.embed_dim = static_cast<std::size_t>(parse_ll(key, value));
  } else if (key == "k_max") {
    config.k_max = static_cast<int>(parse_ll(key, value));
  } else if (key == "fold") {
    config.fold = static_cast<int>(parse_ll(key, value));
  } else if (key == "out_dir") {
    config.out_dir = value;
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

/// key=value file; blank lines and # comments ignored.
inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  ExperimentConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim_ws(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value, got '" + trimmed + "'");
    }
    set_config_key(config, detail::trim_ws(trimmed.substr(0, eq)),
                   detail::trim_ws(trimmed.substr(eq + 1)));
  }
  return config;
}

/// Stable key order for snapshots and logs.
inline std::vector<std::pair<std::string, std::string>> config_to_kv(
    const ExperimentConfig& config) {
  auto real = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  return {
      {"data", config.data},
      {"prompts", config.prompts},
      {"group", config.group},
      {"seed", std::to_string(config.seed)},
      {"epochs", std::to_string(config.epochs)},
      {"epoch_gm_cutoff", std::to_string(config.epoch_gm_cutoff)},
      {"batch_size", std::to_string(config.batch_size)},
      {"encoder_lr", real(config.encoder_lr)},
      {"attention_lr", real(config.attention_lr)},
      {"contrastive_lr", real(config.contrastive_lr)},
      {"swap_count", std::to_string(config.augment.swap_count)},
      {"distort_count", std::to_string(config.augment.distort_count)},
      {"distort_rate", real(config.augment.distort_rate)},
      {"gm_enabled", config.augment.gm_enabled ? "true" : "false"},
      {"window_len", std::to_string(config.encoder.window_len)},
      {"embed_dim", std::to_string(config.encoder.embed_dim)},
      {"k_max", std::to_string(config.k_max)},
      {"fold", std::to_string(config.fold)},
      {"out_dir", config.out_dir},
  };
}

}  // namespace raes
