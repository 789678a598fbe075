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

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "raes/error.hpp"
#include "raes/matrix.hpp"

namespace raes {

enum class Source { response, prompt };

/// Token-to-id map with reserved ids PAD=0, UNK=1, CLS=2. Ids are dense and
/// assigned in insertion order; CLS is only ever inserted programmatically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kReserved = 3;

  int add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const int id = kReserved + static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }

  /// Id of a token, or UNK when absent.
  int id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const {
    return ids_.count(token) > 0;
  }

  const std::string& token_of(int id) const {
    static const std::string reserved[] = {"<pad>", "<unk>", "<cls>"};
    if (id >= 0 && id < kReserved) {
      return reserved[static_cast<std::size_t>(id)];
    }
    const std::size_t index = static_cast<std::size_t>(id - kReserved);
    if (id < 0 || index >= tokens_.size()) {
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(size()));
    }
    return tokens_[index];
  }

  /// Total id count including the reserved ids.
  int size() const { return kReserved + static_cast<int>(tokens_.size()); }

  /// One token per line; line number equals id minus the reserved count.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const std::string& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Vocabulary vocab;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw VocabError("empty token line in " + path.string());
      if (vocab.contains(line)) {
        throw VocabError("duplicate token '" + line + "' in " + path.string());
      }
      vocab.add(line);
    }
    return vocab;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct TokenSequence {
  std::vector<int> ids;
  Source source = Source::response;
};

struct EncoderConfig {
  int window_len = 64;
  int embed_dim = 32;
};

/// Lowercases and splits text into maximal [a-z0-9] runs.
inline std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    const char lower = static_cast<char>(
        std::tolower(static_cast<unsigned char>(c)));
    if ((lower >= 'a' && lower <= 'z') || (lower >= '0' && lower <= '9')) {
      cur.push_back(lower);
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

/// Maps text to ids; unknown tokens become UNK. Responses get CLS prepended,
/// so an empty response still yields [CLS].
inline TokenSequence tokenize(const std::string& text, const Vocabulary& vocab,
                              Source source) {
  TokenSequence seq;
  seq.source = source;
  if (source == Source::response) seq.ids.push_back(Vocabulary::kCls);
  for (const std::string& token : split_tokens(text)) {
    seq.ids.push_back(vocab.id_of(token));
  }
  return seq;
}

/// Fixed-length windows over a token sequence; the last window is padded
/// with PAD. An empty sequence yields an empty stack.
struct WindowStack {
  int window_len = 0;
  std::vector<std::vector<int>> windows;

  std::size_t n_windows() const { return windows.size(); }
};

inline WindowStack segment_windows(const TokenSequence& seq, int window_len) {
  if (window_len < 2) {
    throw ConfigError("window_len must be >= 2, got " +
                      std::to_string(window_len));
  }
  WindowStack stack;
  stack.window_len = window_len;
  const std::size_t len = seq.ids.size();
  const std::size_t wl = static_cast<std::size_t>(window_len);
  for (std::size_t start = 0; start < len; start += wl) {
    std::vector<int> window(seq.ids.begin() + static_cast<std::ptrdiff_t>(start),
                            seq.ids.begin() + static_cast<std::ptrdiff_t>(
                                                  std::min(start + wl, len)));
    window.resize(wl, Vocabulary::kPad);
    stack.windows.push_back(std::move(window));
  }
  return stack;
}

/// Supplies one embedding matrix (window_len x d) per token window; the
/// extension point for plugging in an external contextual encoder.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Matrix embed_window(std::span<const int> ids) = 0;
  virtual int embed_dim() const = 0;
};

/// Trainable lookup table: token id -> row of the embedding matrix.
class LookupProvider : public EmbeddingProvider {
 public:
  explicit LookupProvider(const Matrix& table) : table_(table) {}

  Matrix embed_window(std::span<const int> ids) override {
    Matrix out(ids.size(), table_.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const int id = ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= table_.rows()) {
        throw VocabError("token id " + std::to_string(id) +
                         " outside embedding table of " +
                         std::to_string(table_.rows()) + " rows");
      }
      for (std::size_t c = 0; c < table_.cols(); ++c) {
        out(i, c) = table_(static_cast<std::size_t>(id), c);
      }
    }
    return out;
  }

  int embed_dim() const override { return static_cast<int>(table_.cols()); }

 private:
  const Matrix& table_;
};

/// Embeds every window; output is one (window_len x d) matrix per window.
inline std::vector<Matrix> encode(const WindowStack& stack,
                                  EmbeddingProvider& provider) {
  std::vector<Matrix> out;
  out.reserve(stack.n_windows());
  for (const std::vector<int>& window : stack.windows) {
    Matrix m = provider.embed_window(window);
    if (m.rows() != static_cast<std::size_t>(stack.window_len) ||
        m.cols() != static_cast<std::size_t>(provider.embed_dim())) {
      throw ShapeError("provider returned " + m.shape_str() + ", expected (" +
                       std::to_string(stack.window_len) + "x" +
                       std::to_string(provider.embed_dim()) + ")");
    }
    out.push_back(std::move(m));
  }
  return out;
}

/// Concatenates per-window matrices along the token axis, restoring one
/// contiguous (n_windows * window_len, d) sequence matrix.
inline Matrix collapse_segments(const std::vector<Matrix>& stack) {
  if (stack.empty()) throw ShapeError("collapse_segments: empty stack");
  const std::size_t d = stack[0].cols();
  std::size_t rows = 0;
  for (const Matrix& m : stack) {
    if (m.cols() != d) {
      throw ShapeError("collapse_segments: mixed widths " + m.shape_str());
    }
    rows += m.rows();
  }
  Matrix out(rows, d);
  std::size_t r = 0;
  for (const Matrix& m : stack) {
    for (std::size_t i = 0; i < m.rows(); ++i, ++r) {
      for (std::size_t c = 0; c < d; ++c) out(r, c) = m(i, c);
    }
  }
  return out;
}

/// Flattened ids in collapse order (including trailing PAD).
inline std::vector<int> collapse_ids(const WindowStack& stack) {
  std::vector<int> ids;
  ids.reserve(stack.n_windows() * static_cast<std::size_t>(stack.window_len));
  for (const std::vector<int>& window : stack.windows) {
    ids.insert(ids.end(), window.begin(), window.end());
  }
  return ids;
}

/// Mask flags aligned with collapse order: true marks a PAD position.
inline std::vector<bool> pad_mask(const WindowStack& stack) {
  std::vector<bool> mask;
  mask.reserve(stack.n_windows() * static_cast<std::size_t>(stack.window_len));
  for (const std::vector<int>& window : stack.windows) {
    for (int id : window) mask.push_back(id == Vocabulary::kPad);
  }
  return mask;
}

}  // namespace raes
