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

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "raes/error.hpp"
#include "raes/metrics.hpp"
#include "raes/runlog.hpp"

namespace raes {

// Side-by-side comparison of runs: per-metric fold means, differences
// against the first run, and paired-test significance markers.

namespace detail {

struct MetricSeries {
  std::string name;
  std::vector<std::vector<double>> per_log;  // fold vectors, one per log
};

inline std::string pad_right(std::string s, std::size_t width) {
  while (s.size() < width) s += ' ';
  return s;
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return std::string(buf);
}

}  // namespace detail

inline std::string cmd_report(const std::vector<std::string>& runlog_paths) {
  if (runlog_paths.size() < 2) {
    throw ConfigError("report needs >= 2 runlogs, got " +
                      std::to_string(runlog_paths.size()));
  }
  std::vector<RunLog> logs;
  std::vector<std::string> names;
  for (const std::string& path : runlog_paths) {
    logs.push_back(load_runlog(path));
    names.push_back(std::filesystem::path(path).stem().string());
  }
  const std::size_t fold_count = logs.front().folds.size();
  for (std::size_t i = 1; i < logs.size(); ++i) {
    if (logs[i].folds.size() != fold_count) {
      throw ConfigError("runlogs are not comparable: " + names.front() +
                        " has " + std::to_string(fold_count) + " folds, " +
                        names[i] + " has " +
                        std::to_string(logs[i].folds.size()));
    }
  }

  // A metric row appears only when every log carries it in every fold.
  std::vector<detail::MetricSeries> series;
  auto gather = [&](const std::string& name, auto&& extract) {
    detail::MetricSeries s;
    s.name = name;
    for (const RunLog& log : logs) {
      std::vector<double> values = extract(log);
      if (values.size() != fold_count) return;
      s.per_log.push_back(std::move(values));
    }
    series.push_back(std::move(s));
  };
  gather("test_qwk", [](const RunLog& log) { return log.fold_qwk(); });
  gather("swap_detect",
         [](const RunLog& log) { return log.fold_swap_rates(); });
  for (const double rate : {0.25, 0.5, 1.0}) {
    gather("distort@" + detail::fixed6(rate).substr(0, 4),
           [rate](const RunLog& log) {
             return log.fold_distort_rates(rate);
           });
  }

  const std::size_t name_w = 14;
  const std::size_t col_w = 12;
  std::string table;
  table += detail::pad_right("metric", name_w);
  table += detail::pad_right("base:" + names[0], col_w + 6);
  for (std::size_t i = 1; i < names.size(); ++i) {
    table += detail::pad_right(names[i], col_w);
    table += detail::pad_right("diff", col_w);
    table += detail::pad_right("p", 10);
    table += "sig";
    if (i + 1 < names.size()) table += "  ";
  }
  table += "\n";

  for (const detail::MetricSeries& s : series) {
    table += detail::pad_right(s.name, name_w);
    table += detail::pad_right(detail::fixed6(macro_average(s.per_log[0])),
                               col_w + 6);
    for (std::size_t i = 1; i < s.per_log.size(); ++i) {
      const double base_mean = macro_average(s.per_log[0]);
      const double mean = macro_average(s.per_log[i]);
      table += detail::pad_right(detail::fixed6(mean), col_w);
      char diff_buf[64];
      std::snprintf(diff_buf, sizeof(diff_buf), "%+.6f", mean - base_mean);
      table += detail::pad_right(diff_buf, col_w);
      std::string p_text = "-";
      std::string sig;
      bool all_zero = true;
      for (std::size_t f = 0; f < fold_count; ++f) {
        if (s.per_log[i][f] != s.per_log[0][f]) all_zero = false;
      }
      if (!all_zero) {
        try {
          const TTestResult t = paired_t_test(s.per_log[i], s.per_log[0]);
          char p_buf[64];
          std::snprintf(p_buf, sizeof(p_buf), "%.4g", t.p);
          p_text = p_buf;
          sig = significance_marker(t.p);
        } catch (const DegenerateError&) {
          sig = "zero-variance";
        }
      }
      table += detail::pad_right(p_text, 10);
      table += sig;
      if (i + 1 < s.per_log.size()) table += "  ";
    }
    table += "\n";
  }
  return table;
}

}  // namespace raes
