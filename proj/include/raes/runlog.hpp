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

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "raes/error.hpp"

namespace raes {

// Structured text record of one training run: config snapshot, data hash,
// per-epoch losses, per-fold test metrics, notes. Every number a rerun must
// reproduce goes through the fingerprint; wall time deliberately does not.

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_mse = 0.0;
  double dev_qwk = 0.0;  // nan when agreement was degenerate that epoch
};

struct DistortRow {
  double rate_param = 0.0;
  int total = 0;
  int detected = 0;
  int skipped = 0;

  double rate() const {
    if (total <= 0) throw ConfigError("distort row with zero samples");
    return static_cast<double>(detected) / static_cast<double>(total);
  }
};

struct FoldResult {
  int fold_index = 0;
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  std::vector<std::pair<int, double>> test_qwk_by_prompt;
  double test_qwk_mean = 0.0;
  bool swap_applicable = false;
  int swap_total = 0;
  int swap_detected = 0;
  std::vector<DistortRow> distort;

  double swap_rate() const {
    if (swap_total <= 0) throw ConfigError("swap rate with zero samples");
    return static_cast<double>(swap_detected) /
           static_cast<double>(swap_total);
  }
};

struct RunLog {
  std::vector<std::pair<std::string, std::string>> config_kv;
  std::string data_hash;
  int n_records = 0;
  std::vector<FoldResult> folds;
  std::vector<std::string> notes;
  double wall_seconds = 0.0;

  std::vector<double> fold_qwk() const {
    std::vector<double> out;
    for (const FoldResult& f : folds) out.push_back(f.test_qwk_mean);
    return out;
  }

  std::vector<double> fold_swap_rates() const {
    std::vector<double> out;
    for (const FoldResult& f : folds) {
      if (!f.swap_applicable || f.swap_total <= 0) return {};
      out.push_back(f.swap_rate());
    }
    return out;
  }

  std::vector<double> fold_distort_rates(double rate_param) const {
    std::vector<double> out;
    for (const FoldResult& f : folds) {
      bool found = false;
      for (const DistortRow& row : f.distort) {
        if (row.rate_param == rate_param && row.total > 0) {
          out.push_back(row.rate());
          found = true;
          break;
        }
      }
      if (!found) return {};
    }
    return out;
  }

  /// Every reproducible metric, rendered at full precision. Two runs with
  /// the same config and seed must agree on this string exactly.
  std::string metrics_fingerprint() const {
    std::string out;
    auto real = [&](double v) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out += buf;
      out += '\n';
    };
    out += data_hash + "\n" + std::to_string(n_records) + "\n";
    for (const FoldResult& f : folds) {
      out += "fold " + std::to_string(f.fold_index) + "\n";
      for (const EpochStats& e : f.epochs) {
        real(e.train_loss);
        real(e.dev_mse);
        real(e.dev_qwk);
      }
      out += std::to_string(f.best_epoch) + "\n";
      for (const auto& [pid, value] : f.test_qwk_by_prompt) {
        out += std::to_string(pid) + " ";
        real(value);
      }
      real(f.test_qwk_mean);
      out += std::to_string(f.swap_applicable) + " " +
             std::to_string(f.swap_total) + " " +
             std::to_string(f.swap_detected) + "\n";
      for (const DistortRow& row : f.distort) {
        real(row.rate_param);
        out += std::to_string(row.total) + " " +
               std::to_string(row.detected) + " " +
               std::to_string(row.skipped) + "\n";
      }
    }
    return out;
  }
};

namespace detail {

inline std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline double parse_logged_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw SchemaError("runlog: bad real '" + s + "'");
  }
  return v;
}

inline int parse_logged_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw SchemaError("runlog: bad integer '" + s + "'");
  }
  if (used != s.size()) throw SchemaError("runlog: bad integer '" + s + "'");
  return v;
}

/// key=value suffix extractor for runlog lines.
inline std::string field_after(const std::string& line,
                               const std::string& key) {
  const std::string needle = key + "=";
  const std::size_t pos = line.find(needle);
  if (pos == std::string::npos) {
    throw SchemaError("runlog: missing field '" + key + "' in: " + line);
  }
  const std::size_t start = pos + needle.size();
  const std::size_t end = line.find(' ', start);
  return line.substr(start, end == std::string::npos ? std::string::npos
                                                     : end - start);
}

}  // namespace detail

inline void save_runlog(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write runlog: " + path);
  using detail::real_str;
  out << "raes-runlog v1\n";
  out << "[config]\n";
  for (const auto& [key, value] : log.config_kv) {
    out << key << "=" << value << "\n";
  }
  out << "[data]\n";
  out << "hash=" << log.data_hash << "\n";
  out << "records=" << log.n_records << "\n";
  for (const FoldResult& f : log.folds) {
    out << "[fold " << f.fold_index << "]\n";
    for (const EpochStats& e : f.epochs) {
      out << "epoch " << e.epoch << " train_loss=" << real_str(e.train_loss)
          << " dev_mse=" << real_str(e.dev_mse)
          << " dev_qwk=" << real_str(e.dev_qwk) << "\n";
    }
    out << "best_epoch=" << f.best_epoch << "\n";
    for (const auto& [pid, value] : f.test_qwk_by_prompt) {
      out << "test_qwk prompt=" << pid << " value=" << real_str(value)
          << "\n";
    }
    out << "test_qwk_mean=" << real_str(f.test_qwk_mean) << "\n";
    out << "swap_detect applicable=" << (f.swap_applicable ? 1 : 0)
        << " total=" << f.swap_total << " detected=" << f.swap_detected
        << "\n";
    for (const DistortRow& row : f.distort) {
      out << "distort_detect rate_param=" << real_str(row.rate_param)
          << " total=" << row.total << " detected=" << row.detected
          << " skipped=" << row.skipped << "\n";
    }
  }
  out << "[notes]\n";
  for (const std::string& note : log.notes) out << "- " << note << "\n";
  out << "[summary]\n";
  out << "wall_seconds=" << real_str(log.wall_seconds) << "\n";
  out << "[end]\n";
  if (!out) throw IoError("failed writing runlog: " + path);
}

inline RunLog load_runlog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open runlog: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "raes-runlog v1") {
    throw VersionError("not a runlog file: " + path);
  }
  using detail::field_after;
  using detail::parse_logged_int;
  using detail::parse_logged_real;

  RunLog log;
  enum class Section { none, config, data, fold, notes, summary, end };
  Section section = Section::none;
  FoldResult* fold = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '[') {
      if (line == "[config]") {
        section = Section::config;
      } else if (line == "[data]") {
        section = Section::data;
      } else if (line.rfind("[fold ", 0) == 0) {
        section = Section::fold;
        FoldResult f;
        f.fold_index =
            parse_logged_int(line.substr(6, line.size() - 7));
        log.folds.push_back(f);
        fold = &log.folds.back();
      } else if (line == "[notes]") {
        section = Section::notes;
      } else if (line == "[summary]") {
        section = Section::summary;
      } else if (line == "[end]") {
        section = Section::end;
      } else {
        throw SchemaError("runlog: unknown section " + line);
      }
      continue;
    }
    switch (section) {
      case Section::config: {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
          throw SchemaError("runlog: bad config line: " + line);
        }
        log.config_kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        break;
      }
      case Section::data:
        if (line.rfind("hash=", 0) == 0) {
          log.data_hash = line.substr(5);
        } else if (line.rfind("records=", 0) == 0) {
          log.n_records = parse_logged_int(line.substr(8));
        } else {
          throw SchemaError("runlog: bad data line: " + line);
        }
        break;
      case Section::fold: {
        if (!fold) throw SchemaError("runlog: fold line outside fold");
        if (line.rfind("epoch ", 0) == 0) {
          EpochStats e;
          std::istringstream ls(line);
          std::string word;
          ls >> word >> e.epoch;
          e.train_loss = parse_logged_real(field_after(line, "train_loss"));
          e.dev_mse = parse_logged_real(field_after(line, "dev_mse"));
          e.dev_qwk = parse_logged_real(field_after(line, "dev_qwk"));
          fold->epochs.push_back(e);
        } else if (line.rfind("best_epoch=", 0) == 0) {
          fold->best_epoch = parse_logged_int(line.substr(11));
        } else if (line.rfind("test_qwk prompt=", 0) == 0) {
          fold->test_qwk_by_prompt.emplace_back(
              parse_logged_int(field_after(line, "prompt")),
              parse_logged_real(field_after(line, "value")));
        } else if (line.rfind("test_qwk_mean=", 0) == 0) {
          fold->test_qwk_mean = parse_logged_real(line.substr(14));
        } else if (line.rfind("swap_detect ", 0) == 0) {
          fold->swap_applicable =
              parse_logged_int(field_after(line, "applicable")) != 0;
          fold->swap_total = parse_logged_int(field_after(line, "total"));
          fold->swap_detected =
              parse_logged_int(field_after(line, "detected"));
        } else if (line.rfind("distort_detect ", 0) == 0) {
          DistortRow row;
          row.rate_param =
              parse_logged_real(field_after(line, "rate_param"));
          row.total = parse_logged_int(field_after(line, "total"));
          row.detected = parse_logged_int(field_after(line, "detected"));
          row.skipped = parse_logged_int(field_after(line, "skipped"));
          fold->distort.push_back(row);
        } else {
          throw SchemaError("runlog: bad fold line: " + line);
        }
        break;
      }
      case Section::notes:
        if (line.rfind("- ", 0) != 0) {
          throw SchemaError("runlog: bad note line: " + line);
        }
        log.notes.push_back(line.substr(2));
        break;
      case Section::summary:
        if (line.rfind("wall_seconds=", 0) == 0) {
          log.wall_seconds = parse_logged_real(line.substr(13));
        }
        break;
      case Section::none:
        throw SchemaError("runlog: content before first section: " + line);
      case Section::end:
        throw SchemaError("runlog: content after [end]: " + line);
    }
  }
  if (section != Section::end) {
    throw SchemaError("runlog truncated: missing [end] in " + path);
  }
  return log;
}

}  // namespace raes
