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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "raes/augment.hpp"
#include "raes/config.hpp"
#include "raes/error.hpp"
#include "raes/runlog.hpp"
#include "raes/train.hpp"

namespace raes {

struct PreviewOutput {
  std::vector<AugmentedSample> samples;
  std::vector<std::string> notes;
  std::string path;
};

/// Writes up to n samples of each augmentation provenance that applies to
/// the configured rubric group, for human inspection.
inline PreviewOutput cmd_augment_preview(const ExperimentConfig& config,
                                         int n) {
  if (n < 1) throw ConfigError("preview count must be >= 1");
  config.validate();
  const GroupData data = load_group_data(config);
  std::filesystem::create_directories(config.out_dir);

  PreviewOutput out;
  Rng rng = Rng(config.seed).fork(777);

  std::vector<AugmentedSample> normals;
  for (const EssayRecord& r : data.records) {
    normals.push_back(make_normal_sample(r, data.scale));
  }
  const double mean = mean_normalized_label(data.records, data.scale);

  std::vector<AugmentedSample> swapped_tail;
  if (data.group.prompt_ids.size() >= 2) {
    const auto with_swaps = prompt_swap(normals, n, data.group, mean, rng);
    swapped_tail.assign(with_swaps.begin() +
                            static_cast<std::ptrdiff_t>(normals.size()),
                        with_swaps.end());
    if (swapped_tail.empty()) {
      out.notes.push_back("no swap-eligible essays above the mean label");
    }
    for (const AugmentedSample& s : swapped_tail) out.samples.push_back(s);
  } else {
    out.notes.push_back("prompt swap not applicable: group " + config.group +
                        " has a single prompt");
  }

  bool has_lowest = false;
  for (const AugmentedSample& s : normals) {
    if (s.label == 0.0) has_lowest = true;
  }
  if (has_lowest) {
    const auto with_distort = response_distort(normals, n, rng);
    for (std::size_t i = normals.size(); i < with_distort.size(); ++i) {
      out.samples.push_back(with_distort[i]);
    }
  } else {
    out.notes.push_back("response distortion not applicable: no "
                        "lowest-score essays in group " + config.group);
  }

  if (!swapped_tail.empty()) {
    const auto twice = response_distort(swapped_tail, n, rng);
    for (std::size_t i = swapped_tail.size(); i < twice.size(); ++i) {
      out.samples.push_back(twice[i]);
    }
  }

  out.path = config.out_dir + "/preview.tsv";
  std::ofstream file(out.path);
  if (!file) throw IoError("cannot write preview: " + out.path);
  for (const std::string& note : out.notes) file << "# " << note << "\n";
  file << "essay_id\tprovenance\tbase_prompt_id\tprompt_id_used\tlabel\t"
          "essay\n";
  for (const AugmentedSample& s : out.samples) {
    file << s.essay_id << "\t" << provenance_name(s.provenance) << "\t"
         << s.base_prompt_id << "\t" << s.prompt_id_used << "\t"
         << detail::real_str(s.label) << "\t" << detail::quote(s.text) << "\n";
  }
  if (!file) throw IoError("failed writing preview: " + out.path);
  return out;
}

/// Load path for preview files; leading # lines come back as notes.
inline PreviewOutput parse_preview(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open preview: " + path);
  PreviewOutput out;
  out.path = path;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!header_seen && line.rfind("# ", 0) == 0) {
      out.notes.push_back(line.substr(2));
      continue;
    }
    if (!header_seen) {
      if (line !=
          "essay_id\tprovenance\tbase_prompt_id\tprompt_id_used\tlabel\t"
          "essay") {
        throw SchemaError("preview line " + std::to_string(line_no) +
                          ": unexpected header");
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> fields = detail::split_tsv_line(line);
    if (fields.size() != 6) {
      throw SchemaError("preview line " + std::to_string(line_no) +
                        ": expected 6 fields, got " +
                        std::to_string(fields.size()));
    }
    AugmentedSample s;
    s.essay_id = detail::parse_ll("essay_id", fields[0]);
    s.provenance = provenance_from_name(fields[1]);
    s.base_prompt_id =
        static_cast<int>(detail::parse_ll("base_prompt_id", fields[2]));
    s.prompt_id_used =
        static_cast<int>(detail::parse_ll("prompt_id_used", fields[3]));
    s.label = detail::parse_logged_real(fields[4]);
    s.text = detail::unquote(fields[5]);
    out.samples.push_back(std::move(s));
  }
  if (!header_seen) throw SchemaError("preview missing header: " + path);
  return out;
}

}  // namespace raes
