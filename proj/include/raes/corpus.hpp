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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "raes/error.hpp"
#include "raes/rng.hpp"

namespace raes {

enum class Genre { ARG, RES, NAR };

inline const char* genre_name(Genre g) {
  switch (g) {
    case Genre::ARG:
      return "ARG";
    case Genre::RES:
      return "RES";
    case Genre::NAR:
      return "NAR";
  }
  return "?";
}

/// Integer score range of one prompt.
struct ScoreScale {
  int prompt_id = 0;
  int min_score = 0;
  int max_score = 0;

  int categories() const { return max_score - min_score + 1; }
};

struct EssayRecord {
  std::int64_t essay_id = 0;
  int prompt_id = 0;
  std::string text;
  int raw_score = 0;
  int grade_level = 0;
  Genre genre = Genre::ARG;
};

/// Prompts evaluated under one identical scoring rubric.
struct RubricGroup {
  std::string group_id;
  std::vector<int> prompt_ids;
};

struct FoldSplit {
  int fold_index = 0;
  std::vector<std::int64_t> train_ids, dev_ids, test_ids;
};

// Per-prompt metadata: score range, genre, writer grade level.
struct PromptInfo {
  int prompt_id;
  int min_score;
  int max_score;
  Genre genre;
  int grade_level;
};

inline const std::array<PromptInfo, 8>& prompt_table() {
  static const std::array<PromptInfo, 8> table = {{
      {1, 2, 12, Genre::ARG, 8},
      {2, 1, 6, Genre::ARG, 10},
      {3, 0, 3, Genre::RES, 10},
      {4, 0, 3, Genre::RES, 10},
      {5, 0, 4, Genre::RES, 8},
      {6, 0, 4, Genre::RES, 10},
      {7, 0, 30, Genre::NAR, 7},
      {8, 0, 60, Genre::NAR, 10},
  }};
  return table;
}

inline const PromptInfo& prompt_info(int prompt_id) {
  if (prompt_id < 1 || prompt_id > 8) {
    throw ValidationError("unknown prompt id " + std::to_string(prompt_id));
  }
  return prompt_table()[static_cast<std::size_t>(prompt_id - 1)];
}

inline ScoreScale scale_for_prompt(int prompt_id) {
  const PromptInfo& p = prompt_info(prompt_id);
  return ScoreScale{p.prompt_id, p.min_score, p.max_score};
}

/// The six rubric groups: {1},{2},{3,4},{5,6},{7},{8}.
inline const std::vector<RubricGroup>& rubric_groups() {
  static const std::vector<RubricGroup> groups = {
      {"1", {1}},   {"2", {2}}, {"3-4", {3, 4}},
      {"5-6", {5, 6}}, {"7", {7}}, {"8", {8}},
  };
  return groups;
}

inline const RubricGroup& group_for_prompt(int prompt_id) {
  for (const RubricGroup& g : rubric_groups()) {
    for (int p : g.prompt_ids) {
      if (p == prompt_id) return g;
    }
  }
  throw ValidationError("unknown prompt id " + std::to_string(prompt_id));
}

inline const RubricGroup& group_by_id(const std::string& group_id) {
  for (const RubricGroup& g : rubric_groups()) {
    if (g.group_id == group_id) return g;
  }
  throw ConfigError("unknown rubric group '" + group_id +
                    "' (expected one of 1, 2, 3-4, 5-6, 7, 8)");
}

/// Maps a raw integer score onto [0, 1].
inline double normalize_score(int raw, const ScoreScale& scale) {
  if (raw < scale.min_score || raw > scale.max_score) {
    throw ValidationError("score " + std::to_string(raw) +
                          " outside scale " + std::to_string(scale.min_score) +
                          ".." + std::to_string(scale.max_score) +
                          " of prompt " + std::to_string(scale.prompt_id));
  }
  return static_cast<double>(raw - scale.min_score) /
         static_cast<double>(scale.max_score - scale.min_score);
}

/// Clamps to [0, 1], maps back onto the scale and rounds half away from zero.
inline int denormalize_score(double pred, const ScoreScale& scale) {
  const double clamped = std::clamp(pred, 0.0, 1.0);
  const double mapped =
      scale.min_score + clamped * (scale.max_score - scale.min_score);
  return static_cast<int>(std::lround(mapped));
}

namespace detail {

inline std::vector<std::string> split_tsv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    out.reserve(s.size() - 2);
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '"' && i + 2 < s.size() && s[i + 1] == '"') {
        out.push_back('"');
        ++i;
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

/// Loads essays from a tab-separated file with a header row. Required
/// columns: essay_id, essay_set, essay, domain1_score. Extra columns are
/// ignored. Grade level and genre are filled from the built-in prompt table.
inline std::vector<EssayRecord> load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) {
    throw SchemaError("empty file, expected header row: " + path.string());
  }
  const std::vector<std::string> cols = detail::split_tsv_line(header);
  auto col_index = [&](const std::string& name) -> std::size_t {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) {
      throw SchemaError("missing column '" + name + "' in " + path.string());
    }
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t id_col = col_index("essay_id");
  const std::size_t set_col = col_index("essay_set");
  const std::size_t essay_col = col_index("essay");
  const std::size_t score_col = col_index("domain1_score");

  std::vector<EssayRecord> records;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_tsv_line(line);
    const std::size_t needed =
        std::max({id_col, set_col, essay_col, score_col}) + 1;
    if (fields.size() < needed) {
      throw SchemaError("row " + std::to_string(row) + ": expected at least " +
                        std::to_string(needed) + " fields, got " +
                        std::to_string(fields.size()));
    }
    EssayRecord rec;
    try {
      rec.essay_id = std::stoll(fields[id_col]);
      rec.prompt_id = std::stoi(fields[set_col]);
      rec.raw_score = std::stoi(fields[score_col]);
    } catch (const std::exception&) {
      throw ValidationError("row " + std::to_string(row) +
                            ": non-numeric id/set/score field");
    }
    rec.text = detail::unquote(fields[essay_col]);
    if (rec.text.empty()) {
      throw ValidationError("row " + std::to_string(row) + ": empty essay");
    }
    if (rec.prompt_id < 1 || rec.prompt_id > 8) {
      throw ValidationError("row " + std::to_string(row) + ": essay_set " +
                            std::to_string(rec.prompt_id) + " outside 1..8");
    }
    const PromptInfo& info = prompt_info(rec.prompt_id);
    if (rec.raw_score < info.min_score || rec.raw_score > info.max_score) {
      throw ValidationError(
          "row " + std::to_string(row) + ": score " +
          std::to_string(rec.raw_score) + " outside scale " +
          std::to_string(info.min_score) + ".." +
          std::to_string(info.max_score) + " of prompt " +
          std::to_string(rec.prompt_id));
    }
    rec.grade_level = info.grade_level;
    rec.genre = info.genre;
    records.push_back(std::move(rec));
  }
  return records;
}

inline void save_tsv(const std::filesystem::path& path,
                     const std::vector<EssayRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "essay_id\tessay_set\tessay\tdomain1_score\n";
  for (const EssayRecord& r : records) {
    out << r.essay_id << '\t' << r.prompt_id << '\t' << detail::quote(r.text)
        << '\t' << r.raw_score << '\n';
  }
}

/// Prompt texts, one per prompt id.
inline std::map<int, std::string> load_prompts_tsv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) {
    throw SchemaError("empty prompts file: " + path.string());
  }
  const std::vector<std::string> cols = detail::split_tsv_line(header);
  if (cols.size() < 2 || cols[0] != "prompt_id" || cols[1] != "prompt") {
    throw SchemaError("prompts file header must be 'prompt_id\\tprompt': " +
                      path.string());
  }
  std::map<int, std::string> prompts;
  std::string line;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::split_tsv_line(line);
    if (fields.size() < 2) {
      throw SchemaError("prompts row " + std::to_string(row) +
                        ": expected 2 fields");
    }
    int pid = 0;
    try {
      pid = std::stoi(fields[0]);
    } catch (const std::exception&) {
      throw ValidationError("prompts row " + std::to_string(row) +
                            ": non-numeric prompt_id");
    }
    prompts[pid] = detail::unquote(fields[1]);
  }
  return prompts;
}

inline void save_prompts_tsv(const std::filesystem::path& path,
                             const std::map<int, std::string>& prompts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "prompt_id\tprompt\n";
  for (const auto& [pid, text] : prompts) {
    out << pid << '\t' << detail::quote(text) << '\n';
  }
}

/// Buckets records into the six rubric groups. Every group is present in the
/// result, possibly empty.
inline std::map<std::string, std::vector<EssayRecord>> segment_by_rubric(
    const std::vector<EssayRecord>& records) {
  std::map<std::string, std::vector<EssayRecord>> out;
  for (const RubricGroup& g : rubric_groups()) out[g.group_id] = {};
  for (const EssayRecord& r : records) {
    out[group_for_prompt(r.prompt_id).group_id].push_back(r);
  }
  return out;
}

/// Seeded 5-fold split with the 60/20/20 rotation: fold i tests on part i,
/// uses part (i+1) mod 5 as dev, and trains on the remaining three parts.
inline std::vector<FoldSplit> make_folds(const std::vector<EssayRecord>& records,
                                         std::uint64_t seed) {
  if (records.size() < 5) {
    throw ConfigError("make_folds: need at least 5 records, got " +
                      std::to_string(records.size()));
  }
  std::vector<std::int64_t> ids;
  ids.reserve(records.size());
  for (const EssayRecord& r : records) ids.push_back(r.essay_id);
  Rng rng(seed);
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  std::array<std::vector<std::int64_t>, 5> parts;
  const std::size_t base = n / 5;
  const std::size_t extra = n % 5;
  std::size_t pos = 0;
  for (std::size_t p = 0; p < 5; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    parts[p].assign(ids.begin() + pos, ids.begin() + pos + len);
    pos += len;
  }

  std::vector<FoldSplit> folds;
  for (int f = 0; f < 5; ++f) {
    FoldSplit split;
    split.fold_index = f;
    split.test_ids = parts[static_cast<std::size_t>(f)];
    split.dev_ids = parts[static_cast<std::size_t>((f + 1) % 5)];
    for (int p = 0; p < 5; ++p) {
      if (p == f || p == (f + 1) % 5) continue;
      const auto& part = parts[static_cast<std::size_t>(p)];
      split.train_ids.insert(split.train_ids.end(), part.begin(), part.end());
    }
    folds.push_back(std::move(split));
  }
  return folds;
}

}  // namespace raes
