/*
 * Copyright 2026 The mmlime Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// mmlime: explain multimodal (lyrics + audio) classifiers with local
// perturbation surrogates and aggregate the results per class.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmlime.hpp"

int main(int argc, char** argv) {
  using namespace mmlime;
  CLI::App app{"Multimodal perturbation explainer for lyrics + audio classifiers"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.get_config_ptr()->group("Configuration");

  cli::ExplainOptions ex;
  std::size_t samples = 0;
  auto* explain = app.add_subcommand("explain", "Explain one instance or a manifest of instances");
  explain->configurable();
  explain->add_option("--model", ex.model, "toy:lexicon|toy:band|toy:fused or extern:<command>")
      ->capture_default_str();
  explain->add_option("--model-params", ex.model_params, "JSON parameter file for toy models");
  explain->add_option("--separator", ex.separator, "null | hpss | stems:<dir> | extern:<command>")
      ->capture_default_str();
  explain->add_option("--stem-sources", ex.stem_sources, "Source names for stems:/extern: separators")
      ->delimiter(',');
  explain->add_option("--segments", ex.segments, "Temporal audio segments")->capture_default_str();
  explain->add_option("--modality", ex.modality, "text | audio | multimodal")
      ->check(CLI::IsMember({"text", "audio", "multimodal"}))
      ->capture_default_str();
  auto* samples_opt = explain->add_option("--samples", samples,
                                          "Perturbation samples (default 2500 text, 2000 audio, 5000 multimodal)");
  explain->add_option("--inclusion-prob", ex.inclusion_prob, "Probability of keeping each feature")
      ->capture_default_str();
  explain->add_option("--kernel-width", ex.kernel_width, "Proximity kernel width")->capture_default_str();
  explain->add_option("--ridge", ex.ridge, "Ridge penalty")->capture_default_str();
  explain->add_option("--seed", ex.seed, "Random seed")->capture_default_str();
  explain->add_option("--batch-size", ex.batch_size, "Model query batch size")->capture_default_str();
  explain->add_flag("--exhaustive", ex.exhaustive, "Enumerate all 2^d masks instead of sampling (d <= 24)");
  explain->add_option("--classes", ex.classes, "predicted | all | comma list of class names or indices")
      ->capture_default_str();
  explain->add_flag("--blank-unexplained", ex.blank_unexplained,
                    "Remove the unexplained modality instead of passing it through");
  explain->add_option("--output", ex.output, "Output directory")->capture_default_str();
  explain->add_option("--id", ex.id, "Instance id (default: input file stem)");
  explain->add_option("--audio", ex.audio, "WAV file");
  explain->add_option("--lyrics", ex.lyrics, "Lyrics text file");
  explain->add_option("--manifest", ex.manifest, "CSV with header id,audio_path,lyrics_path");
  explain->add_option("--workers", ex.workers, "Parallel instance workers")->capture_default_str();

  cli::AggregateOptions ag;
  auto* aggregate = app.add_subcommand("aggregate", "Aggregate local explanations into per-class reports");
  aggregate->configurable();
  aggregate->add_option("--explanations", ag.explanations, "Directory of explanation JSON files")->required();
  aggregate->add_option("--method", ag.method, "avg | homogeneity")->capture_default_str();
  aggregate->add_option("--top-k", ag.top_k, "Features per class in the report")->capture_default_str();
  aggregate->add_flag("--collapse-segments", ag.collapse_segments, "Sum audio features over segments per source");
  aggregate->add_option("--output", ag.output, "Directory for global_report.json and .csv")
      ->capture_default_str();
  aggregate->add_option("--svg", ag.svg, "Directory for one bar chart per class");

  selfcheck::Options sc;
  auto* check = app.add_subcommand("selfcheck", "Run the embedded invariant suite");
  check->add_option("--corrupt", sc.corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  if (*explain) {
    if (samples_opt->count() > 0 || samples != 0) ex.samples = samples;
    return cli::cmd_explain(ex);
  }
  if (*aggregate) return cli::cmd_aggregate(ag);
  return cli::cmd_selfcheck(sc);
}
