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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raes/grad_check.hpp"
#include "raes/preview.hpp"
#include "raes/report.hpp"
#include "raes/synth.hpp"
#include "raes/train.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  int fold = 0;
  std::string out_dir;
};

/// Registers --config/--seed/--fold/--out-dir on a subcommand. Flags given
/// on the command line override the config file.
void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "key=value experiment config file");
  cmd->add_option("--seed", flags.seed, "override config seed");
  cmd->add_option("--fold", flags.fold,
                  "override config fold (-1 runs all five)");
  cmd->add_option("--out-dir", flags.out_dir, "override config out_dir");
}

raes::ExperimentConfig resolve_config(const CLI::App* cmd,
                                      const CommonFlags& flags) {
  raes::ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = raes::load_config_file(flags.config_path);
  }
  if (cmd->count("--seed") > 0) config.seed = flags.seed;
  if (cmd->count("--fold") > 0) config.fold = flags.fold;
  if (cmd->count("--out-dir") > 0) config.out_dir = flags.out_dir;
  return config;
}

int run_train(const raes::ExperimentConfig& config) {
  const raes::TrainOutput out = raes::cmd_train(config);
  for (const raes::FoldResult& fold : out.log.folds) {
    std::printf("fold %d best_epoch=%d test_qwk_mean=%.6f", fold.fold_index,
                fold.best_epoch, fold.test_qwk_mean);
    if (fold.swap_applicable && fold.swap_total > 0) {
      std::printf(" swap_rate=%.4f", fold.swap_rate());
    }
    for (const raes::DistortRow& row : fold.distort) {
      std::printf(" distort@%g=%.4f", row.rate_param, row.rate());
    }
    std::printf("\n");
  }
  for (const std::string& note : out.log.notes) {
    std::printf("note: %s\n", note.c_str());
  }
  std::printf("runlog: %s\n", out.runlog_path.c_str());
  for (const std::string& path : out.checkpoint_paths) {
    std::printf("checkpoint: %s\n", path.c_str());
  }
  return 0;
}

int run_synth(const std::string& group_id, int n, int vocab_size,
              std::uint64_t seed, double min_score_share, double low_order_bias,
              const std::string& out_dir) {
  raes::SynthSpec spec;
  spec.prompt_ids = raes::group_by_id(group_id).prompt_ids;
  spec.n_per_prompt = n;
  spec.vocab_size = vocab_size;
  spec.seed = seed;
  spec.min_score_share = min_score_share;
  spec.low_order_bias = low_order_bias;
  const raes::SynthCorpus corpus = raes::synth_corpus(spec);
  std::filesystem::create_directories(out_dir);
  const std::string data = out_dir + "/data.tsv";
  const std::string prompts = out_dir + "/prompts.tsv";
  raes::save_tsv(data, corpus.records);
  raes::save_prompts_tsv(prompts, corpus.prompt_texts);
  std::printf("wrote %zu records to %s\n", corpus.records.size(),
              data.c_str());
  std::printf("wrote %zu prompts to %s\n", corpus.prompt_texts.size(),
              prompts.c_str());
  return 0;
}

/// Gradient checks on a small random batch: mean squared error alone, then
/// the composite loss with the contrastive term.
int run_gradcheck(std::uint64_t seed, double eps, double tol) {
  using namespace raes;
  const std::vector<std::string> responses = {
      "the story shows patience pays off in the end",
      "dear local newspaper computers help people learn",
      "the author builds the setting with cold details",
      "machines cannot replace time spent outside",
  };
  const std::string prompt_text =
      "read the passage. explain how the author builds the mood.";
  const std::vector<double> labels = {0.9, 0.2, 0.7, 0.4};
  const std::vector<int> scores = {3, 1, 3, 1};
  const std::vector<int> grade_levels = {8, 8, 10, 10};

  Vocabulary vocab;
  for (const std::string& text : responses) {
    for (const std::string& w : split_tokens(text)) vocab.add(w);
  }
  for (const std::string& w : split_tokens(prompt_text)) vocab.add(w);

  EncoderConfig config;
  config.window_len = 6;
  config.embed_dim = 6;
  ModelParams params(vocab.size(), 6, 4);
  Rng rng(seed);
  params.init(rng);
  const std::vector<ParamTensor*> all = params.all();

  auto forward_batch = [&](bool with_grad, bool contrastive) {
    const PromptCache prompt =
        encode_prompt(prompt_text, params, vocab, config);
    const std::size_t b = responses.size();
    std::vector<SampleCache> caches(b);
    std::vector<double> preds(b);
    for (std::size_t i = 0; i < b; ++i) {
      preds[i] = forward_sample(responses[i], prompt, params, vocab, config,
                                &caches[i]);
    }
    double loss = mse_loss(preds, labels);
    Matrix dZ;
    if (contrastive) {
      Matrix Z(b, static_cast<std::size_t>(params.d));
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < Z.cols(); ++c) Z(i, c) = caches[i].z1[c];
      }
      const GradeMatchTerms terms = grade_match_terms(Z, scores, grade_levels);
      const int k = 2;
      loss -= (terms.c_s - terms.c_d) / static_cast<double>(k);
      if (with_grad) dZ = grade_match_backward(Z, scores, grade_levels, k);
    }
    if (with_grad) {
      params.zero_grads();
      for (std::size_t i = 0; i < b; ++i) {
        const double d_out =
            2.0 * (preds[i] - labels[i]) / static_cast<double>(b);
        std::span<const double> extra;
        if (contrastive) extra = dZ.row(i);
        backward_sample(caches[i], prompt, params, d_out, extra);
      }
    }
    return loss;
  };

  const GradCheckResult mse_only = grad_check(
      [&](bool with_grad) { return forward_batch(with_grad, false); }, all,
      eps, tol);
  std::printf("mse loss:       %s\n", mse_only.summary().c_str());
  const GradCheckResult composite = grad_check(
      [&](bool with_grad) { return forward_batch(with_grad, true); }, all,
      eps, tol);
  std::printf("composite loss: %s\n", composite.summary().c_str());
  return mse_only.passed() && composite.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rubric-specific essay scoring pipeline"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train one rubric group");
  add_common_flags(train, train_flags);

  CommonFlags eval_flags;
  std::string checkpoint_path;
  CLI::App* eval = app.add_subcommand("eval", "score a fold's test split");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  add_common_flags(eval, eval_flags);

  CommonFlags preview_flags;
  int preview_n = 5;
  CLI::App* preview = app.add_subcommand(
      "augment-preview", "write augmented samples for inspection");
  preview->add_option("-n,--count", preview_n, "samples per provenance");
  add_common_flags(preview, preview_flags);

  std::vector<std::string> runlog_paths;
  CLI::App* report =
      app.add_subcommand("report", "compare runlogs with paired tests");
  report->add_option("runlogs", runlog_paths, "runlog files (first is base)")
      ->expected(-1);

  std::string synth_group = "3-4";
  int synth_n = 100;
  int synth_vocab = 256;
  std::uint64_t synth_seed = 1;
  double synth_min_share = -1.0;
  double synth_low_order = 0.0;
  std::string synth_out = "data";
  CLI::App* synth =
      app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--group", synth_group, "rubric group id");
  synth->add_option("--n", synth_n, "essays per prompt");
  synth->add_option("--vocab", synth_vocab, "vocabulary budget");
  synth->add_option("--seed", synth_seed, "generation seed");
  synth->add_option("--min-score-share", synth_min_share,
                    "share of essays at the scale minimum (negative: uniform)");
  synth->add_option("--low-order-bias", synth_low_order,
                    "probability of the least-ordered knobs per score");
  synth->add_option("--out-dir", synth_out, "output directory");

  std::uint64_t gc_seed = 7;
  double gc_eps = 1e-5;
  double gc_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of the full model gradient");
  gradcheck->add_option("--seed", gc_seed, "parameter init seed");
  gradcheck->add_option("--eps", gc_eps, "finite-difference step");
  gradcheck->add_option("--tol", gc_tol, "max relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return run_train(resolve_config(train, train_flags));
    }
    if (eval->parsed()) {
      const raes::EvalOutput out =
          raes::cmd_eval(checkpoint_path, resolve_config(eval, eval_flags));
      std::printf("%s", out.table.c_str());
      return 0;
    }
    if (preview->parsed()) {
      const raes::PreviewOutput out = raes::cmd_augment_preview(
          resolve_config(preview, preview_flags), preview_n);
      for (const std::string& note : out.notes) {
        std::printf("note: %s\n", note.c_str());
      }
      std::printf("preview: %s (%zu samples)\n", out.path.c_str(),
                  out.samples.size());
      return 0;
    }
    if (report->parsed()) {
      std::printf("%s", raes::cmd_report(runlog_paths).c_str());
      return 0;
    }
    if (synth->parsed()) {
      return run_synth(synth_group, synth_n, synth_vocab, synth_seed,
                       synth_min_share, synth_low_order, synth_out);
    }
    if (gradcheck->parsed()) {
      return run_gradcheck(gc_seed, gc_eps, gc_tol);
    }
  } catch (const raes::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
