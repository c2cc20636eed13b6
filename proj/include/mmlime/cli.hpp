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

// Command implementations behind the `mmlime` executable. Argument parsing
// lives in the tool; these functions take resolved option structs and return
// stable exit codes.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mmlime/audio_features.hpp"
#include "mmlime/external_predictor.hpp"
#include "mmlime/global_agg.hpp"
#include "mmlime/json_io.hpp"
#include "mmlime/lime_engine.hpp"
#include "mmlime/predictor.hpp"
#include "mmlime/report_io.hpp"
#include "mmlime/selfcheck.hpp"
#include "mmlime/text_features.hpp"
#include "mmlime/wav.hpp"

namespace mmlime::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitSelfcheckFailed = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitPredictor = 4,
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const predict::PredictorError*>(&e)) return kExitPredictor;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kExitIo;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kExitIo;
  return kExitConfig;
}

// Stems whose sum is further than this from the mix draw a warning.
inline constexpr double kStemResidualWarnDb = -40.0;

// ---------------------------------------------------------------------------
// Model and separator specs.

struct ModelSpec {
  enum class Kind { Toy, External } kind = Kind::Toy;
  std::string toy_kind;  // lexicon, band or fused
  std::string command;   // shell command for extern
};

inline ModelSpec parse_model_spec(const std::string& s) {
  ModelSpec m;
  if (s.starts_with("toy:")) {
    m.toy_kind = s.substr(4);
    if (m.toy_kind != "lexicon" && m.toy_kind != "band" && m.toy_kind != "fused") {
      throw ValidationError("unknown toy model '" + m.toy_kind + "' (expected lexicon, band or fused)");
    }
  } else if (s.starts_with("extern:")) {
    m.kind = ModelSpec::Kind::External;
    m.command = s.substr(7);
    if (m.command.empty()) throw ValidationError("extern: model needs a command");
  } else {
    throw ValidationError("model spec '" + s + "' must be toy:<kind> or extern:<command>");
  }
  return m;
}

// Commands run through /bin/sh so they may carry their own arguments.
inline std::vector<std::string> shell_argv(const std::string& command) { return {"/bin/sh", "-c", command}; }

inline audio::SeparatorSpec parse_separator_spec(const std::string& s, const std::vector<std::string>& sources) {
  audio::SeparatorSpec spec;
  if (s == "null") {
    spec = audio::SeparatorSpec::null();
  } else if (s == "hpss") {
    spec = audio::SeparatorSpec::harmonic_percussive();
  } else if (s.starts_with("stems:")) {
    spec = audio::SeparatorSpec::stems(s.substr(6), sources.empty() ? audio::default_stem_sources() : sources);
    if (!std::filesystem::is_directory(spec.stems_dir)) {
      throw ValidationError("stems directory '" + spec.stems_dir.string() + "' does not exist");
    }
  } else if (s.starts_with("extern:")) {
    if (s.size() == 7) throw ValidationError("extern: separator needs a command");
    spec = audio::SeparatorSpec::external(shell_argv(s.substr(7)),
                                          sources.empty() ? audio::default_stem_sources() : sources);
  } else {
    throw ValidationError("separator spec '" + s + "' must be null, hpss, stems:<dir> or extern:<command>");
  }
  if (!sources.empty() && (spec.kind == audio::SeparatorKind::Null || spec.kind == audio::SeparatorKind::Hpss)) {
    throw ValidationError("--stem-sources applies only to stems: and extern: separators");
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Instance inputs.

struct InstanceInput {
  std::string id;
  std::filesystem::path audio;   // empty: no audio
  std::filesystem::path lyrics;  // empty: no lyrics
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ValidationError("unterminated quote in manifest line");
  out.push_back(std::move(cur));
  return out;
}

// Reads `id,audio_path,lyrics_path`. Relative paths resolve against the
// manifest's directory; an empty path means the modality is absent.
inline std::vector<InstanceInput> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest '" + path.string() + "'");
  const auto base = path.parent_path();
  std::string line;
  std::vector<InstanceInput> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"id", "audio_path", "lyrics_path"}) {
        throw ValidationError("manifest header must be 'id,audio_path,lyrics_path'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) {
      throw ValidationError("manifest line " + std::to_string(line_no) + " needs 3 fields");
    }
    if (fields[0].empty()) throw ValidationError("manifest line " + std::to_string(line_no) + " has an empty id");
    auto resolve = [&base](const std::string& p) -> std::filesystem::path {
      if (p.empty()) return {};
      std::filesystem::path q(p);
      return q.is_absolute() ? q : base / q;
    };
    out.push_back(InstanceInput{fields[0], resolve(fields[1]), resolve(fields[2])});
  }
  if (!header_seen) throw ValidationError("manifest '" + path.string() + "' is empty");
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (out[k].id == out[i].id) throw ValidationError("duplicate instance id '" + out[i].id + "' in manifest");
    }
  }
  return out;
}

inline MultimodalInstance load_instance(const InstanceInput& input) {
  MultimodalInstance inst;
  inst.id = input.id;
  if (!input.lyrics.empty()) inst.lyrics = text::read_lyrics_file(input.lyrics.string());
  if (!input.audio.empty()) {
    auto a = audio::load_wav(input.audio);
    inst.audio = std::move(a.samples);
    inst.sample_rate = a.sample_rate;
  }
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainOptions {
  std::string model = "toy:fused";
  std::filesystem::path model_params;
  std::string separator = "hpss";
  std::vector<std::string> stem_sources;
  std::size_t segments = audio::kDefaultSegments;
  std::string modality = "multimodal";
  std::optional<std::size_t> samples;
  double inclusion_prob = 0.5;
  double kernel_width = 0.25;
  double ridge = 1.0;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  bool exhaustive = false;
  // "predicted", "all", or a comma list of class names or indices.
  std::string classes = "predicted";
  bool blank_unexplained = false;
  std::filesystem::path output = "explanations";
  // Single instance.
  std::string id;
  std::filesystem::path audio;
  std::filesystem::path lyrics;
  // Or a manifest.
  std::filesystem::path manifest;
  std::size_t workers = 1;
};

// Output file for one (instance, class) explanation.
inline std::string explanation_filename(const std::string& id, const ClassLabel& cls) {
  return io::sanitize_filename(id) + "__c" + std::to_string(cls.index) + ".json";
}

inline std::vector<std::size_t> resolve_classes(const std::string& spec, const LabelSet& labels) {
  if (spec == "predicted" || spec.empty()) return {};
  std::vector<std::size_t> out;
  if (spec == "all") {
    for (const auto& l : labels) out.push_back(l.index);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (auto idx = labels.find(item)) {
      out.push_back(*idx);
      continue;
    }
    const bool numeric = !item.empty() && std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (!numeric) throw ValidationError("unknown class '" + item + "'");
    out.push_back(labels.at(std::stoul(item)).index);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string summary_line(const std::vector<lime::LocalExplanation>& explanations) {
  const auto& e = explanations.front();
  std::ostringstream s;
  char prob[32];
  std::snprintf(prob, sizeof prob, "%.4f", e.predicted_probability);
  s << e.instance_id << ": predicted " << e.predicted_class.name << " (p=" << prob << ") top:";
  const auto* shown = &e;
  for (const auto& x : explanations) {
    if (x.target == x.predicted_class) shown = &x;
  }
  const auto ranked = shown->ranked();
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
    char w[32];
    std::snprintf(w, sizeof w, "%+.4f", ranked[i].weight);
    s << (i ? ", " : " ") << ranked[i].feature.key_string() << " " << w;
  }
  s << " (class " << shown->target.name << ", d=" << shown->weights.size() << ")";
  return s.str();
}

class ExplainRun {
 public:
  explicit ExplainRun(ExplainOptions opts) : opts_(std::move(opts)) {}

  int run(std::ostream& out, std::ostream& err) {
    std::vector<InstanceInput> inputs;
    try {
      inputs = validate_config();
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return exit_code_for(e);
    }

    std::vector<std::string> summaries(inputs.size());
    std::vector<int> codes(inputs.size(), kExitOk);
    std::mutex err_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      std::shared_ptr<predict::Predictor> model = shared_model_;
      bool connect_failed = false;
      for (std::size_t i = next++; i < inputs.size(); i = next++) {
        try {
          if (!model && !connect_failed) {
            try {
              model = connect();
            } catch (...) {
              connect_failed = true;
              throw;
            }
          }
          if (!model) throw predict::PredictorError(predict::PredictorErrorKind::ProcessExited, "model unavailable");
          summaries[i] = process(inputs[i], *model, err, err_mutex);
        } catch (const predict::PredictorError& e) {
          codes[i] = kExitPredictor;
          // A broken external process cannot serve later instances.
          if (!shared_model_) model.reset();
          std::lock_guard lock(err_mutex);
          err << "error: instance '" << inputs[i].id << "': " << e.what() << "\n";
        } catch (const std::exception& e) {
          codes[i] = exit_code_for(e);
          std::lock_guard lock(err_mutex);
          err << "error: instance '" << inputs[i].id << "': " << e.what() << "\n";
        }
      }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(opts_.workers, inputs.size()));
    if (n_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
      for (auto& t : threads) t.join();
    }

    std::size_t ok = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (codes[i] == kExitOk) {
        out << summaries[i] << "\n";
        ++ok;
      }
    }
    if (inputs.size() > 1) out << "processed " << ok << " of " << inputs.size() << " instances\n";
    for (int c : codes) {
      if (c != kExitOk) return c;
    }
    return kExitOk;
  }

 private:
  std::vector<InstanceInput> validate_config() {
    model_spec_ = parse_model_spec(opts_.model);
    modality_ = lime::modality_selector_from_string(opts_.modality);
    separator_ = parse_separator_spec(opts_.separator, opts_.stem_sources);
    if (opts_.segments == 0) throw ValidationError("--segments must be at least 1");
    if (opts_.workers == 0) throw ValidationError("--workers must be at least 1");

    lime_ = lime::LimeConfig::defaults_for(modality_);
    if (opts_.samples) lime_.n_samples = *opts_.samples;
    lime_.inclusion_prob = opts_.inclusion_prob;
    lime_.kernel_width = opts_.kernel_width;
    lime_.ridge = opts_.ridge;
    lime_.seed = opts_.seed;
    lime_.batch_size = opts_.batch_size;
    lime_.sampling = opts_.exhaustive ? lime::SamplingMode::Exhaustive : lime::SamplingMode::Bernoulli;
    lime_.validate();

    std::vector<InstanceInput> inputs;
    const bool single = !opts_.audio.empty() || !opts_.lyrics.empty() || !opts_.id.empty();
    if (!opts_.manifest.empty()) {
      if (single) throw ValidationError("give either --manifest or --audio/--lyrics/--id, not both");
      inputs = read_manifest(opts_.manifest);
      if (inputs.empty()) throw ValidationError("manifest '" + opts_.manifest.string() + "' lists no instances");
    } else {
      if (opts_.audio.empty() && opts_.lyrics.empty()) {
        throw ValidationError("no input: give --audio and/or --lyrics, or --manifest");
      }
      std::string id = opts_.id;
      if (id.empty()) id = (opts_.audio.empty() ? opts_.lyrics : opts_.audio).stem().string();
      inputs.push_back(InstanceInput{id, opts_.audio, opts_.lyrics});
    }

    if (model_spec_.kind == ModelSpec::Kind::Toy) {
      if (opts_.model_params.empty()) throw ValidationError("toy models need --model-params <file.json>");
      if (!std::filesystem::is_regular_file(opts_.model_params)) {
        throw ValidationError("model parameter file '" + opts_.model_params.string() + "' does not exist");
      }
      nlohmann::json params;
      try {
        params = nlohmann::json::parse(io::read_text_file(opts_.model_params));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("model parameter file '" + opts_.model_params.string() + "': " + e.what());
      }
      shared_model_ = predict::make_toy_model(model_spec_.toy_kind, params);
      labels_ = shared_model_->labels();
    } else {
      // Connect once up front so a bad command fails before any work starts.
      auto first = connect();
      labels_ = first->labels();
      spare_model_ = std::move(first);
    }
    target_classes_ = resolve_classes(opts_.classes, labels_);

    std::error_code ec;
    std::filesystem::create_directories(opts_.output, ec);
    if (ec || !std::filesystem::is_directory(opts_.output)) {
      throw IoError("cannot create output directory '" + opts_.output.string() + "'");
    }
    return inputs;
  }

  std::shared_ptr<predict::Predictor> connect() {
    {
      std::lock_guard lock(spare_mutex_);
      if (spare_model_) return std::exchange(spare_model_, nullptr);
    }
    std::shared_ptr<predict::Predictor> p = predict::external_predictor_connect(
        "/bin/sh", {"-c", model_spec_.command});
    if (p->labels() != labels_ && !labels_.empty()) {
      throw predict::PredictorError(predict::PredictorErrorKind::MalformedJson,
                                    "model process reported a different label set on reconnect");
    }
    return p;
  }

  audio::SeparatorSpec separator_for(const InstanceInput& input) const {
    audio::SeparatorSpec s = separator_;
    if (s.kind == audio::SeparatorKind::Stems) {
      const auto per_instance = s.stems_dir / input.id;
      if (std::filesystem::is_directory(per_instance)) s.stems_dir = per_instance;
    }
    return s;
  }

  std::string process(const InstanceInput& input, predict::Predictor& model, std::ostream& err,
                      std::mutex& err_mutex) {
    const MultimodalInstance inst = load_instance(input);
    lime::ExplainOptions eo;
    eo.lime = lime_;
    eo.modality = modality_;
    eo.n_segments = opts_.segments;
    eo.target_classes = target_classes_;
    eo.blank_unexplained_modality = opts_.blank_unexplained;
    const lime::PerturbationRenderer renderer(inst, separator_for(input), eo);
    if (const auto& d = renderer.decomposition(); d && d->residual_db) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.1f dB", *d->residual_db);
      std::lock_guard lock(err_mutex);
      err << (*d->residual_db > kStemResidualWarnDb ? "warning" : "note") << ": instance '" << input.id
          << "': stems differ from the mix by " << buf << "\n";
    }
    const auto set = lime::perturb_and_query(renderer, model, lime_);
    const auto explanations =
        lime::fit_explanations(inst.id, renderer.space(), set, model.labels(), lime_, target_classes_);
    for (const auto& e : explanations) {
      io::write_file_atomic(opts_.output / explanation_filename(e.instance_id, e.target),
                            io::explanation_to_json(e).dump(2) + "\n");
    }
    return summary_line(explanations);
  }

  ExplainOptions opts_;
  ModelSpec model_spec_;
  lime::ModalitySelector modality_ = lime::ModalitySelector::Multimodal;
  audio::SeparatorSpec separator_;
  lime::LimeConfig lime_;
  LabelSet labels_;
  std::vector<std::size_t> target_classes_;
  std::shared_ptr<predict::Predictor> shared_model_;
  std::mutex spare_mutex_;
  std::shared_ptr<predict::Predictor> spare_model_;
};

inline int cmd_explain(const ExplainOptions& opts, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  ExplainRun run(opts);
  return run.run(out, err);
}

// ---------------------------------------------------------------------------
// aggregate

struct AggregateOptions {
  std::filesystem::path explanations;
  std::string method = "avg";
  std::size_t top_k = 10;
  bool collapse_segments = false;
  std::filesystem::path output = ".";
  std::filesystem::path svg;  // empty: no charts
};

inline agg::WeightTable load_explanation_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("explanations directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  if (files.empty()) throw ValidationError("explanations directory '" + dir.string() + "' has no .json files");
  std::sort(files.begin(), files.end());
  agg::WeightTable table;
  for (const auto& f : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_text_file(f));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("'" + f.string() + "' is not valid JSON: " + e.what());
    }
    try {
      table.add(io::explanation_from_json(j));
    } catch (const Error& e) {
      throw FormatError("'" + f.string() + "': " + e.what());
    }
  }
  return table;
}

inline int cmd_aggregate(const AggregateOptions& opts, std::ostream& out = std::cout,
                         std::ostream& err = std::cerr) {
  try {
    const auto method = agg::aggregation_method_from_string(opts.method);
    if (opts.top_k == 0) throw ValidationError("--top-k must be at least 1");
    const auto table = load_explanation_dir(opts.explanations);
    const auto report = agg::aggregate(table, method);
    const io::ReportView view{&report, opts.top_k, opts.collapse_segments};

    std::error_code ec;
    std::filesystem::create_directories(opts.output, ec);
    if (ec) throw IoError("cannot create output directory '" + opts.output.string() + "'");
    io::write_file_atomic(opts.output / "global_report.json", io::report_to_json(view).dump(2) + "\n");
    io::write_file_atomic(opts.output / "global_report.csv", io::report_to_csv(view));
    if (!opts.svg.empty()) {
      std::filesystem::create_directories(opts.svg, ec);
      if (ec) throw IoError("cannot create SVG directory '" + opts.svg.string() + "'");
      for (const auto& cls : report.classes) {
        io::write_file_atomic(opts.svg / (io::sanitize_filename(cls.name) + ".svg"),
                              io::class_chart_svg(view, cls));
      }
    }
    out << "aggregated " << table.n_instances() << " instances over " << report.classes.size() << " classes ("
        << agg::to_string(method) << ") into " << (opts.output / "global_report.json").string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

// ---------------------------------------------------------------------------
// selfcheck

inline int cmd_selfcheck(const selfcheck::Options& opts, std::ostream& out = std::cout,
                         std::ostream& err = std::cerr) {
  const auto results = selfcheck::run(opts);
  const selfcheck::CheckResult* first_failure = nullptr;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) out << ": " << r.detail;
    out << "\n";
    if (!r.passed && !first_failure) first_failure = &r;
  }
  if (first_failure) {
    err << "selfcheck failed: " << first_failure->name << "\n";
    return kExitSelfcheckFailed;
  }
  out << "all " << results.size() << " checks passed\n";
  return kExitOk;
}

}  // namespace mmlime::cli
