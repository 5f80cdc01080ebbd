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

#include "opennod/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "opennod/codec.hpp"
#include "opennod/errors.hpp"
#include "opennod/fusion.hpp"
#include "opennod/refinement.hpp"
#include "opennod/report.hpp"

namespace opennod {

namespace {

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("failed while writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::map<ImageId, ImageEntry> image_entries(const GroundTruthSet& manifest, const std::filesystem::path& root) {
  std::map<ImageId, ImageEntry> out;
  for (const auto& [id, img] : manifest.images) {
    ImageEntry e;
    e.ref.id = id;
    if (!img.info.file_name.empty()) e.ref.path = (root / img.info.file_name).string();
    e.size = ImageSize{img.info.width, img.info.height};
    out.emplace(id, std::move(e));
  }
  return out;
}

void check_classes(const RawByImage& dets, const ClassVocabulary& vocab, const std::filesystem::path& source) {
  for (const auto& [image, list] : dets) {
    for (const auto& d : list) {
      if (d.class_id && !vocab.contains(*d.class_id)) {
        throw InvariantError(source.string() + ": image " + std::to_string(image) + " has class_id " +
                             std::to_string(*d.class_id) + " outside the vocabulary");
      }
    }
  }
}

// Lazily opened backend session; reopened after a failure so one bad image
// does not poison the rest of a worker's queue.
class LazySession {
 public:
  explicit LazySession(const BackendFactory& factory) : factory_(factory) {}
  Backend* get() {
    if (!session_) {
      if (!factory_) throw BackendError("no backend endpoint configured");
      session_ = factory_();
    }
    return session_.get();
  }
  void reset() { session_.reset(); }

 private:
  const BackendFactory& factory_;
  std::unique_ptr<Backend> session_;
};

}  // namespace

std::string resolve_backend_endpoint(const std::string& config_value, const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kBackendEnvVar); env != nullptr && *env != '\0') return env;
  return config_value;
}

BackendFactory endpoint_factory(const std::string& endpoint, std::size_t max_batch) {
  if (endpoint.empty()) return {};
  return [endpoint, max_batch]() -> std::unique_ptr<Backend> {
    return connect_backend(endpoint, ProtocolClient::Options{max_batch});
  };
}

std::uint64_t matrix_cache_key(const ClassVocabulary& vocab, const PromptTemplateSet& templates,
                               const std::string& backend_identity, bool use_saeg) {
  std::ostringstream key;
  key << codec::hex64(vocab.hash()) << '|' << codec::hex64(templates.hash()) << '|' << backend_identity << '|'
      << (use_saeg ? "saeg" : "single-prompt");
  return codec::hash64(key.str());
}

BuildMatrixResult cmd_build_matrix(const PipelineConfig& config, const BackendFactory& backend, EventLog& log) {
  if (config.vocab.empty()) throw InvariantError("build-matrix: no vocabulary configured");
  if (config.templates.empty()) throw InvariantError("build-matrix: no prompt templates configured");
  const ClassVocabulary vocab = load_vocabulary(config.vocab);
  const PromptTemplateSet templates = load_templates(config.templates);

  BuildMatrixResult result;
  result.path = config.matrix_path();
  result.cache_key = matrix_cache_key(vocab, templates, config.backend, config.switches.use_saeg);

  if (const auto header = read_class_matrix_header(result.path)) {
    if (header->cache_key == result.cache_key && header->vocabulary_hash == vocab.hash() &&
        header->count == vocab.size()) {
      try {
        result.matrix = read_class_matrix(result.path);
        result.cache_hit = true;
        log.info("build-matrix", "cache hit", {{"path", result.path.string()}});
        return result;
      } catch (const ParseError& e) {
        log.warn("build-matrix", "cached matrix unreadable; rebuilding", {{"error", std::string(e.what())}});
      }
    } else {
      log.warn("build-matrix", "cached matrix does not match vocabulary/templates/backend; rebuilding",
               {{"path", result.path.string()}});
    }
  }

  if (!backend) throw BackendError("build-matrix: no backend endpoint configured");
  auto session = backend();
  log.info("build-matrix", "building class text matrix",
           {{"classes", static_cast<std::int64_t>(vocab.size())},
            {"templates", static_cast<std::int64_t>(templates.size())},
            {"use_saeg", config.switches.use_saeg}});
  const ClassTextMatrix built =
      build_class_matrix(vocab, templates, *session, MatrixBuildOptions{config.switches.use_saeg});
  write_class_matrix(result.path, built, result.cache_key);
  // Use the stored float32 form so later runs see exactly the same values.
  result.matrix = read_class_matrix(result.path);
  log.info("build-matrix", "matrix written",
           {{"path", result.path.string()}, {"dim", static_cast<std::int64_t>(built.dim())}});
  return result;
}

RunResult cmd_run(const PipelineConfig& config, const BackendFactory& backend, EventLog& log) {
  config.validate();
  if (config.vocab.empty()) throw InvariantError("run: no vocabulary configured");
  if (config.image_list().empty()) throw InvariantError("run: no image list (images or gt) configured");
  const Switches& sw = config.switches;
  const ClassVocabulary vocab = load_vocabulary(config.vocab);
  const GroundTruthSet manifest = load_ground_truth(config.image_list(), &vocab);
  const auto images = image_entries(manifest, config.image_root);

  RawByImage kn, bg, gd;
  if (!config.dets_kn.empty()) kn = load_detections(config.dets_kn, SourceTag::KN);
  if (!config.dets_bg.empty()) bg = load_detections(config.dets_bg, SourceTag::BG);
  if (sw.use_gdino && !config.dets_gd.empty()) gd = load_detections(config.dets_gd, SourceTag::GD);
  check_classes(kn, vocab, config.dets_kn);
  check_classes(gd, vocab, config.dets_gd);

  const auto sources = group_sources(kn, bg, gd);
  for (const auto& [image, src] : sources) {
    const auto missing = [&](const RawByImage& dump, const std::filesystem::path& path, const char* name) {
      if (!path.empty() && dump.count(image) == 0) {
        log.warn("ingest", "image missing from a detection dump", {{"image_id", image}, {"source", std::string(name)}});
      }
    };
    missing(kn, config.dets_kn, "KN");
    missing(bg, config.dets_bg, "BG");
    if (sw.use_gdino) missing(gd, config.dets_gd, "GD");
  }

  const bool need_bg = sw.use_bg_labelling && !bg.empty();
  std::optional<ClassTextMatrix> matrix;
  if (need_bg) {
    matrix = cmd_build_matrix(config, backend, log).matrix;
    if (matrix->vocabulary_hash() != vocab.hash() || matrix->size() != vocab.size()) {
      throw InvariantError("class matrix does not belong to the configured vocabulary");
    }
  }

  LabellingOptions labelling;
  labelling.use_gdino = sw.use_gdino;
  labelling.use_bg_labelling = sw.use_bg_labelling;
  labelling.class_nms = config.class_nms;
  labelling.nms_iou = config.nms_iou;
  labelling.context_pad = config.context_pad;
  labelling.classify.temperature = config.temperature;
  labelling.classify.mode = config.confidence;
  if (config.label_scope == LabelScope::Novel) {
    labelling.classify.allowed.resize(vocab.size());
    for (const auto& e : vocab.entries()) labelling.classify.allowed[static_cast<std::size_t>(e.id)] = !e.known;
  }
  const RefineOptions refine_options{config.effective_k(), sw.use_sam, sw.use_srm};
  if (sw.use_srm && !sw.use_sam) {
    log.warn("refine", "SRM needs SAM scores; with SAM disabled the combined scores are used unchanged");
  }

  std::vector<ImageId> order;
  order.reserve(sources.size());
  for (const auto& [image, src] : sources) order.push_back(image);

  struct Outcome {
    std::optional<FusedPool> pool;
    std::vector<RefinedDetection> dets;
    std::optional<std::string> error;
  };
  std::vector<Outcome> outcomes(order.size());
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    LazySession session(backend);
    for (std::size_t i = next.fetch_add(1); i < order.size(); i = next.fetch_add(1)) {
      const ImageId image = order[i];
      Outcome& out = outcomes[i];
      try {
        const auto entry = images.find(image);
        if (entry == images.end()) throw InvariantError("image is not in the image list; size unknown");
        const ImageSources& src = sources.at(image);
        const bool needs_backend = (need_bg && !src.bg.empty()) || sw.use_sam;
        Backend* b = needs_backend ? session.get() : nullptr;
        FusedPool pool = label_and_fuse(entry->second.ref, entry->second.size, src, matrix ? &*matrix : nullptr, b,
                                        labelling);
        log.info("fusion", "pool assembled",
                 {{"image_id", image},
                  {"n_kn", static_cast<std::int64_t>(pool.counts.n_kn)},
                  {"n_bg", static_cast<std::int64_t>(pool.counts.n_bg)},
                  {"n_gd", static_cast<std::int64_t>(pool.counts.n_gd)},
                  {"n_c", static_cast<std::int64_t>(pool.detections.size())}});
        RefineResult refined = refine(pool, entry->second.ref, entry->second.size, b, refine_options);
        for (const auto& w : refined.warnings) log.warn("refine", w, {{"image_id", image}});
        log.info("refine", "image refined",
                 {{"image_id", image}, {"kept", static_cast<std::int64_t>(refined.detections.size())}});
        out.pool = std::move(pool);
        out.dets = std::move(refined.detections);
      } catch (const std::exception& e) {
        out.error = e.what();
        session.reset();
        log.error("run", "image failed", {{"image_id", image}, {"error", std::string(e.what())}});
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(config.workers, order.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  }

  RunResult result;
  std::ostringstream fused;
  std::ostringstream errors;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const ImageId image = order[i];
    Outcome& out = outcomes[i];
    if (out.error) {
      result.failures.push_back(ImageFailure{image, *out.error});
      errors << nlohmann::json{{"image_id", image}, {"error", *out.error}}.dump() << '\n';
      continue;
    }
    ++result.images_ok;
    result.pool_counts.emplace(image, out.pool->counts);
    if (!config.fused_dump.empty()) write_fused_line(fused, image, out.pool->counts, out.pool->detections);
    if (!out.dets.empty()) result.detections.emplace(image, std::move(out.dets));
  }

  std::ostringstream final_text;
  write_final(final_text, result.detections);
  write_file_atomically(config.output, final_text.str());
  if (!config.fused_dump.empty()) write_file_atomically(config.fused_dump, fused.str());
  const std::filesystem::path errors_path = config.output.string() + ".errors.jsonl";
  if (!result.failures.empty()) {
    write_file_atomically(errors_path, errors.str());
  } else if (std::filesystem::exists(errors_path)) {
    std::filesystem::remove(errors_path);
  }
  log.info("run", "finished",
           {{"images_ok", static_cast<std::int64_t>(result.images_ok)},
            {"images_failed", static_cast<std::int64_t>(result.failures.size())},
            {"output", config.output.string()}});
  return result;
}

EvalResult cmd_eval(const PipelineConfig& config, const std::filesystem::path& predictions, EventLog& log) {
  config.validate();
  if (config.vocab.empty()) throw InvariantError("eval: no vocabulary configured");
  if (config.gt.empty()) throw InvariantError("eval: no ground truth configured");
  const ClassVocabulary vocab = load_vocabulary(config.vocab);
  const GroundTruthSet gt = load_ground_truth(config.gt, &vocab);
  const RefinedByImage dets = load_final(predictions);

  EvalResult result;
  result.report = grouped_map(dets, gt, vocab, EvalOptions{config.effective_k(), config.strict_iou});
  for (const auto& w : result.report.warnings) log.warn("eval", w);

  const std::string mode(to_string(config.mode));
  result.json_path = config.report_dir / "report.json";
  result.markdown_path = config.report_dir / "report.md";
  write_file_atomically(result.json_path, report_to_json(result.report, mode));
  write_file_atomically(result.markdown_path,
                        report_to_markdown(result.report, mode, config.mode == Mode::COCO_OVD));
  log.info("eval", "report written", {{"path", result.json_path.string()}});
  return result;
}

}  // namespace opennod
