// Copyright 2026 The OpenNOD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "opennod/errors.hpp"
#include "opennod/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string mode;
  std::optional<std::size_t> k;
  std::optional<double> temperature;
  bool no_gdino = false;
  bool no_sam = false;
  bool no_srm = false;
  bool no_saeg = false;
  bool no_bg_labelling = false;
  std::optional<std::size_t> workers;
  std::optional<std::string> backend;
  std::string log_path;
  bool quiet = false;
};

void add_common_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("-c,--config", o.config_path, "Pipeline config (JSON)");
  cmd.add_option("--mode", o.mode, "Evaluation protocol: lvis (top 300) or coco_ovd (top 100)")
      ->check(CLI::IsMember({"lvis", "coco_ovd"}));
  cmd.add_option("--k", o.k, "Final detections kept per image (overrides the mode default)");
  cmd.add_option("--temperature", o.temperature, "Softmax temperature for BG-box labelling");
  cmd.add_flag("--no-gdino", o.no_gdino, "Drop the open-set detector pool");
  cmd.add_flag("--no-sam", o.no_sam, "Skip mask-based box refinement");
  cmd.add_flag("--no-srm", o.no_srm, "Keep combined scores instead of SRM scores");
  cmd.add_flag("--no-saeg", o.no_saeg, "Single prompt, first synonym per class");
  cmd.add_flag("--no-bg-labelling", o.no_bg_labelling, "Drop BG boxes instead of labelling them");
  cmd.add_option("--workers", o.workers, "Images processed in parallel");
  cmd.add_option("--backend", o.backend, "Backend endpoint: tcp://HOST:PORT or exec:COMMAND");
  cmd.add_option("--log", o.log_path, "Write structured logs here instead of stderr");
  cmd.add_flag("-q,--quiet", o.quiet, "Only log warnings and errors");
}

opennod::PipelineConfig resolve(const Overrides& o) {
  opennod::PipelineConfig c = o.config_path.empty() ? opennod::PipelineConfig{} : opennod::load_config(o.config_path);
  if (!o.mode.empty()) c.mode = *opennod::parse_mode(o.mode);
  if (o.k) c.k_final = *o.k;
  if (o.temperature) c.temperature = *o.temperature;
  if (o.no_gdino) c.switches.use_gdino = false;
  if (o.no_sam) c.switches.use_sam = false;
  if (o.no_srm) c.switches.use_srm = false;
  if (o.no_saeg) c.switches.use_saeg = false;
  if (o.no_bg_labelling) c.switches.use_bg_labelling = false;
  if (o.workers) c.workers = *o.workers;
  c.backend = opennod::resolve_backend_endpoint(c.backend, o.backend);
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opennod: open-set detection from closed-set detectors, foundation-model labelling, and refinement"};
  app.require_subcommand(1);

  Overrides o;
  std::string out_path;
  std::string predictions;
  std::string report_dir;

  auto* build = app.add_subcommand("build-matrix", "Build (or reuse) the cached class text matrix");
  add_common_options(*build, o);
  auto* run = app.add_subcommand("run", "Fuse, label, and refine detections; writes final.jsonl");
  add_common_options(*run, o);
  run->add_option("-o,--out", out_path, "Output path for final detections");
  auto* eval = app.add_subcommand("eval", "Evaluate final detections; writes report.json and report.md");
  add_common_options(*eval, o);
  eval->add_option("-p,--predictions", predictions, "final.jsonl to evaluate (defaults to the config output)");
  eval->add_option("--report-dir", report_dir, "Directory for report files");
  auto* show = app.add_subcommand("print-config", "Print the effective configuration");
  add_common_options(*show, o);

  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<std::ofstream> log_file;
  opennod::PipelineConfig config;
  try {
    config = resolve(o);
  } catch (const opennod::Error& e) {
    std::cerr << "opennod: " << e.what() << "\n";
    return 2;
  }
  if (!o.log_path.empty()) log_file = std::make_unique<std::ofstream>(o.log_path, std::ios::app);
  opennod::EventLog log(log_file ? static_cast<std::ostream*>(log_file.get()) : &std::cerr, !o.quiet);
  const auto factory = opennod::endpoint_factory(config.backend, config.max_batch);

  try {
    if (*show) {
      std::cout << opennod::serialize_config(config);
      return 0;
    }
    if (*build) {
      const auto r = opennod::cmd_build_matrix(config, factory, log);
      std::cout << (r.cache_hit ? "cache hit: " : "built: ") << r.path.string() << "\n";
      return 0;
    }
    if (*run) {
      if (!out_path.empty()) config.output = out_path;
      const auto r = opennod::cmd_run(config, factory, log);
      std::cout << "images: " << r.images_ok << " ok, " << r.failures.size() << " failed; wrote "
                << config.output.string() << "\n";
      return r.failures.empty() ? 0 : 1;
    }
    if (*eval) {
      if (!report_dir.empty()) config.report_dir = report_dir;
      const auto r = opennod::cmd_eval(config, predictions.empty() ? config.output : std::filesystem::path(predictions), log);
      const auto pct = [](const std::optional<double>& v) {
        return v ? std::to_string(100.0 * *v) : std::string("n/a");
      };
      std::cout << "AP novel " << pct(r.report.ap_novel) << "  known " << pct(r.report.ap_known) << "  all "
                << pct(r.report.ap_all) << "  recall@0.5 " << pct(r.report.recall_05) << "\n";
      std::cout << "wrote " << r.json_path.string() << "\n";
      return 0;
    }
  } catch (const opennod::ParseError& e) {
    std::cerr << "opennod: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "opennod: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
