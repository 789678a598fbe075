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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "raes/encoder.hpp"
#include "raes/error.hpp"
#include "raes/model.hpp"

namespace raes {

/// A trained model plus everything needed to score with it: the vocabulary,
/// the dimensions, and the seed that produced it.
struct Checkpoint {
  int d = 0;
  int k_max = 0;
  int window_len = 0;
  std::uint64_t seed = 0;
  Vocabulary vocab;
  ModelParams params;

  Checkpoint(int dim, int clip, int window, std::uint64_t s, Vocabulary v)
      : d(dim),
        k_max(clip),
        window_len(window),
        seed(s),
        vocab(std::move(v)),
        params(vocab.size(), dim, clip) {}

  EncoderConfig encoder_config() const {
    EncoderConfig cfg;
    cfg.window_len = window_len;
    cfg.embed_dim = d;
    return cfg;
  }

  /// Throws VersionError unless the header matches the expected dimensions.
  void require_dims(int dim, int clip, int window) const {
    if (d != dim || k_max != clip || window_len != window) {
      throw VersionError(
          "checkpoint header (d=" + std::to_string(d) +
          ", k_max=" + std::to_string(k_max) +
          ", window_len=" + std::to_string(window_len) +
          ") does not match expected (d=" + std::to_string(dim) +
          ", k_max=" + std::to_string(clip) +
          ", window_len=" + std::to_string(window) + ")");
    }
  }
};

/// Sectioned text container: header lines, vocabulary, then each parameter
/// matrix row-major in hexfloat (bit-exact round trip).
inline void save_checkpoint(const std::filesystem::path& path,
                            Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "raes-checkpoint v1\n";
  out << "d " << ckpt.d << '\n';
  out << "k_max " << ckpt.k_max << '\n';
  out << "window_len " << ckpt.window_len << '\n';
  out << "vocab_size " << ckpt.vocab.size() << '\n';
  out << "seed " << ckpt.seed << '\n';
  out << "[vocab]\n";
  for (int id = Vocabulary::kReserved; id < ckpt.vocab.size(); ++id) {
    out << ckpt.vocab.token_of(id) << '\n';
  }
  out << std::hexfloat;
  for (ParamTensor* p : ckpt.params.all()) {
    out << "[param " << p->name << ' ' << p->value.rows() << ' '
        << p->value.cols() << "]\n";
    for (std::size_t i = 0; i < p->value.rows(); ++i) {
      for (std::size_t j = 0; j < p->value.cols(); ++j) {
        if (j > 0) out << ' ';
        out << p->value(i, j);
      }
      out << '\n';
    }
  }
  out << "[end]\n";
  if (!out) throw IoError("write failed: " + path.string());
}

namespace detail {

inline std::string expect_line(std::istream& in, const std::string& context) {
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("checkpoint truncated at " + context);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

inline long long header_value(const std::string& line, const std::string& key) {
  std::istringstream ss(line);
  std::string name;
  long long value = 0;
  if (!(ss >> name >> value) || name != key) {
    throw SchemaError("expected checkpoint header '" + key + " <value>', got '" +
                      line + "'");
  }
  return value;
}

}  // namespace detail

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string magic = detail::expect_line(in, "magic");
  if (magic != "raes-checkpoint v1") {
    throw VersionError("unsupported checkpoint format: '" + magic + "'");
  }
  const int d = static_cast<int>(
      detail::header_value(detail::expect_line(in, "d"), "d"));
  const int k_max = static_cast<int>(
      detail::header_value(detail::expect_line(in, "k_max"), "k_max"));
  const int window_len = static_cast<int>(detail::header_value(
      detail::expect_line(in, "window_len"), "window_len"));
  const int vocab_size = static_cast<int>(detail::header_value(
      detail::expect_line(in, "vocab_size"), "vocab_size"));
  const std::uint64_t seed = static_cast<std::uint64_t>(
      detail::header_value(detail::expect_line(in, "seed"), "seed"));
  if (detail::expect_line(in, "[vocab]") != "[vocab]") {
    throw SchemaError("missing [vocab] section");
  }
  Vocabulary vocab;
  for (int id = Vocabulary::kReserved; id < vocab_size; ++id) {
    const std::string token = detail::expect_line(in, "vocab token");
    if (token.empty() || token.front() == '[') {
      throw SchemaError("vocab section shorter than declared size");
    }
    vocab.add(token);
  }
  if (vocab.size() != vocab_size) {
    throw SchemaError("vocab size mismatch");
  }

  Checkpoint ckpt(d, k_max, window_len, seed, std::move(vocab));
  for (ParamTensor* p : ckpt.params.all()) {
    const std::string section = detail::expect_line(in, "param section");
    std::istringstream ss(section);
    std::string bracket, name;
    std::size_t rows = 0, cols = 0;
    ss >> bracket >> name >> rows >> cols;
    if (bracket != "[param" || name != p->name ||
        rows != p->value.rows() || cols != p->value.cols()) {
      throw SchemaError("expected section for '" + p->name + "' " +
                        p->value.shape_str() + ", got '" + section + "'");
    }
    for (std::size_t i = 0; i < rows; ++i) {
      const std::string line = detail::expect_line(in, p->name + " row");
      const char* cursor = line.c_str();
      for (std::size_t j = 0; j < cols; ++j) {
        char* next = nullptr;
        const double v = std::strtod(cursor, &next);
        if (next == cursor) {
          throw SchemaError("malformed value in " + p->name + " row " +
                            std::to_string(i));
        }
        p->value(i, j) = v;
        cursor = next;
      }
    }
  }
  if (detail::expect_line(in, "[end]") != "[end]") {
    throw SchemaError("missing [end] marker");
  }
  return ckpt;
}

}  // namespace raes
