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

// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "brute_force_eval.hpp"
#include "opennod/codec.hpp"
#include "opennod/config.hpp"
#include "opennod/detection_io.hpp"
#include "opennod/evaluation.hpp"
#include "opennod/refinement.hpp"
#include "opennod/rle.hpp"
#include "opennod/saeg.hpp"
#include "random_scene.hpp"
#include "test_support.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using opennod::Embedding;

// Collects failures for one criterion; the first few are echoed.
struct Check {
  std::size_t failures = 0;
  std::vector<std::string> first;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures;
    if (first.size() < 5) first.push_back(what);
  }
};

int g_failed = 0;

void criterion(const std::string& name, double budget_s, const std::function<std::string(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_s > 0) c.expect(secs < budget_s, "runtime " + std::to_string(secs) + " s over budget");
  const bool ok = c.failures == 0;
  if (!ok) ++g_failed;
  std::ostringstream line;
  line << (ok ? "PASS" : "FAIL") << "  " << name << "  [" << std::fixed << std::setprecision(2) << secs << " s";
  if (budget_s > 0) line << " / " << budget_s << " s";
  line << "]";
  if (!detail.empty()) line << "  " << detail;
  std::cout << line.str() << std::endl;
  for (const auto& f : c.first) std::cout << "      " << f << std::endl;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------- SRM

std::string srm_suite(Check& c) {
  // Dyadic inputs keep the hand cases exact in binary floating point.
  const auto m = opennod::minmax(std::vector<double>{1.0, 3.0, 5.0});
  c.expect(m == std::vector<double>{0.0, 0.5, 1.0}, "minmax [1, 3, 5]");
  const auto m2 = opennod::minmax(std::vector<double>{0.2, 0.6, 1.0});
  c.expect(near(m2[0], 0.0, 0) && near(m2[1], 0.5, 1e-15) && near(m2[2], 1.0, 0), "minmax [0.2, 0.6, 1.0]");
  c.expect(opennod::minmax(std::vector<double>{0.4, 0.4, 0.4}) == std::vector<double>{0, 0, 0}, "constant input");
  c.expect(opennod::minmax(std::vector<double>{5}) == std::vector<double>{0}, "single element");
  const auto s = opennod::srm(std::vector<double>{1.0, 3.0, 5.0}, std::vector<double>{0.5, 0.75, 1.0});
  c.expect(s == std::vector<double>{0.0, 0.25, 1.0}, "srm hand case");
  c.expect(opennod::srm(std::vector<double>{0.3}, std::vector<double>{0.8}) == std::vector<double>{0}, "srm single");

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  const int n_vectors = 10000;
  for (int t = 0; t < n_vectors; ++t) {
    const std::size_t n = len(rng);
    std::vector<double> x(n), y(n);
    const bool constant = t % 50 == 0;
    const bool ties = t % 7 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = constant ? 0.37 : (ties ? std::round(u(rng) * 4) / 4 : u(rng));
      y[i] = u(rng);
    }
    const auto mx = opennod::minmax(x);
    const double lo = *std::min_element(x.begin(), x.end()), hi = *std::max_element(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) {
      c.expect(mx[i] >= 0.0 && mx[i] <= 1.0, "minmax range");
      if (lo == hi) c.expect(mx[i] == 0.0, "constant rule");
      for (std::size_t j = 0; j < n; ++j) {
        if (x[i] <= x[j]) c.expect(mx[i] <= mx[j], "order preservation");
      }
    }
    const double a = 0.01 + u(rng) * 50, b = (u(rng) - 0.5) * 100;
    std::vector<double> ax(n);
    for (std::size_t i = 0; i < n; ++i) ax[i] = a * x[i] + b;
    const auto max = opennod::minmax(ax);
    for (std::size_t i = 0; i < n; ++i) c.expect(near(max[i], mx[i], 1e-12), "affine invariance");

    const auto sr = opennod::srm(x, y);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = x[perm[i]];
      py[i] = y[perm[i]];
    }
    const auto psr = opennod::srm(px, py);
    for (std::size_t i = 0; i < n; ++i) {
      c.expect(sr[i] >= 0.0 && sr[i] <= 1.0, "srm range");
      c.expect(psr[i] == sr[perm[i]], "srm permutation equivariance");
    }
  }
  return std::to_string(n_vectors) + " random vectors";
}

// ---------------------------------------------------------------- SAEG

Embedding random_vec(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0, 1);
  Embedding e(d);
  for (auto& v : e) v = n(rng);
  return e;
}

// Deterministic text embedding keyed by the prompt string.
struct HashedTextBackend final : opennod::Backend {
  std::size_t d;
  explicit HashedTextBackend(std::size_t dim) : d(dim) {}
  std::size_t dim() override { return d; }
  std::string model_name() override { return "hashed"; }
  std::vector<Embedding> text_embed(std::span<const std::string> texts) override {
    std::vector<Embedding> out;
    for (const auto& t : texts) {
      std::mt19937_64 rng(opennod::codec::hash64(t));
      out.push_back(random_vec(rng, d));
    }
    return out;
  }
  std::vector<Embedding> image_embed_roi(const opennod::ImageRef&, std::span<const opennod::BBox>, double) override {
    return {};
  }
  std::vector<opennod::SegmentationResult> segment_boxes(const opennod::ImageRef&,
                                                         std::span<const opennod::BBox>) override {
    return {};
  }
};

double max_abs_diff(const Embedding& a, const Embedding& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string saeg_suite(Check& c) {
  std::mt19937_64 rng(77);
  std::size_t cases = 0;
  for (const std::size_t d : {4u, 512u, 1152u}) {
    // Collapse cases.
    const Embedding e = random_vec(rng, d);
    const double n = opennod::l2_norm(e);
    Embedding unit = e;
    for (auto& v : unit) v /= n;
    c.expect(opennod::synonym_feature(std::vector<Embedding>{e}) == unit, "single prompt collapses to e/|e|");
    c.expect(max_abs_diff(opennod::class_feature(std::vector<Embedding>{unit}), unit) <= 1e-15,
             "single synonym collapses");
    c.expect(max_abs_diff(opennod::class_feature(std::vector<Embedding>{unit, unit}), unit) <= 1e-15,
             "duplicate synonyms collapse");

    for (int t = 0; t < 40; ++t, ++cases) {
      std::uniform_int_distribution<int> count(1, 8);
      std::vector<Embedding> prompts(static_cast<std::size_t>(count(rng)));
      for (auto& p : prompts) p = random_vec(rng, d);
      const Embedding f = opennod::synonym_feature(prompts);
      auto shuffled = prompts;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      c.expect(max_abs_diff(opennod::synonym_feature(shuffled), f) <= 1e-9, "prompt permutation");

      std::vector<Embedding> syn(static_cast<std::size_t>(count(rng)));
      for (auto& s : syn) s = opennod::synonym_feature(std::vector<Embedding>{random_vec(rng, d), random_vec(rng, d)});
      const Embedding phi = opennod::class_feature(syn);
      const double norm = opennod::l2_norm(phi);
      c.expect(norm <= 1.0 + 1e-12, "class feature norm above one");
      if (syn.size() > 1) c.expect(norm < 1.0 - 1e-9, "norm reaches one without identical synonyms");
      auto sshuf = syn;
      std::shuffle(sshuf.begin(), sshuf.end(), rng);
      c.expect(max_abs_diff(opennod::class_feature(sshuf), phi) <= 1e-9, "synonym permutation");
      // Identical (after normalization) synonyms give norm exactly one.
      std::vector<Embedding> same{syn[0], syn[0]};
      for (auto& v : same[1]) v *= 3.5;
      c.expect(near(opennod::l2_norm(opennod::class_feature(same)), 1.0, 1e-12), "norm one for identical synonyms");
    }

    // Whole-matrix invariance: synonym order, template order, repeated synonyms.
    HashedTextBackend backend(d);
    std::vector<std::string> templates{"a photo of a [CLASS].", "[CLASS] in the wild", "the [CLASS]", "art of [CLASS]"};
    std::vector<opennod::ClassEntry> entries{{0, "cup", {"mug", "beaker", "tumbler"}, true},
                                             {1, "xylophone", {"marimba", "glockenspiel"}, false}};
    const auto base = opennod::build_class_matrix(opennod::ClassVocabulary::from_entries(entries),
                                                  opennod::PromptTemplateSet(templates), backend);
    auto entries2 = entries;
    std::reverse(entries2[0].synonyms.begin(), entries2[0].synonyms.end());
    entries2[1].synonyms.push_back("marimba");
    entries2[1].synonyms.push_back("xylophone");
    auto templates2 = templates;
    std::rotate(templates2.begin(), templates2.begin() + 1, templates2.end());
    const auto other = opennod::build_class_matrix(opennod::ClassVocabulary::from_entries(entries2),
                                                   opennod::PromptTemplateSet(templates2), backend);
    for (std::size_t k = 0; k < base.size(); ++k) {
      c.expect(max_abs_diff(base.columns()[k], other.columns()[k]) <= 1e-9, "matrix column changed under reordering");
    }
    // Single synonym and single template: the column is the normalized prompt embedding.
    const auto single = opennod::build_class_matrix(
        opennod::ClassVocabulary::from_entries({{0, "cup", {}, true}}), opennod::PromptTemplateSet({"a [CLASS]"}),
        backend);
    Embedding want = backend.text_embed(std::vector<std::string>{"a cup"})[0];
    const double wn = opennod::l2_norm(want);
    for (auto& v : want) v /= wn;
    c.expect(max_abs_diff(single.columns()[0], want) <= 1e-15, "single prompt single synonym column");
  }
  return std::to_string(cases) + " randomized sets over d in {4, 512, 1152}";
}

// ---------------------------------------------------------------- evaluator

std::string evaluator_suite(Check& c) {
  std::mt19937_64 rng(9001);
  std::size_t dets = 0, classes_compared = 0;
  for (int t = 0; t < 200; ++t) {
    const auto s = testing_support::random_scene(rng, {.max_images = 5, .max_classes = 5, .max_gt = 10, .max_dets = 20});
    for (const auto& [_, l] : s.dets) dets += l.size();
    for (const std::size_t max_dets : {300u, 5u}) {
      for (const bool strict : {false, true}) {
        const auto got = opennod::grouped_map(s.dets, s.gt, s.vocab, {.max_dets = max_dets, .strict_iou = strict});
        const auto want = oracle::evaluate(s.dets, s.gt, s.vocab, max_dets, strict);
        const auto same = [&](const std::optional<double>& a, const std::optional<double>& b, const char* what) {
          c.expect(a.has_value() == b.has_value() && (!a || near(*a, *b, 1e-9)),
                   "scene " + std::to_string(t) + ": " + what);
        };
        same(got.ap_all, want.ap_all, "ap_all");
        same(got.ap_known, want.ap_known, "ap_known");
        same(got.ap_novel, want.ap_novel, "ap_novel");
        same(got.ap50_all, want.ap50_all, "ap50_all");
        same(got.ap50_known, want.ap50_known, "ap50_known");
        same(got.ap50_novel, want.ap50_novel, "ap50_novel");
        for (const auto& pc : got.per_class) {
          const auto it = want.per_class_ap.find(pc.class_id);
          same(pc.ap, it == want.per_class_ap.end() ? std::nullopt : std::optional<double>(it->second), "class ap");
          ++classes_compared;
        }
        same(got.recall_05, want.recall, "recall");
        c.expect(got.tp_count == want.tp && got.gt_count == want.n_gt && got.pred_count == want.n_pred,
                 "scene " + std::to_string(t) + ": recall counts");

        const auto rec = opennod::localization_recall(s.dets, s.gt, {0.5, strict});
        const auto all = oracle::evaluate(s.dets, s.gt, s.vocab, 1u << 30, strict);
        c.expect(rec.tp == all.tp && rec.n_gt == all.n_gt && rec.n_pred == all.n_pred,
                 "scene " + std::to_string(t) + ": localization_recall TP");
      }
    }
  }
  return "200 scenes, " + std::to_string(dets) + " detections, " + std::to_string(classes_compared) +
         " class APs compared";
}

// ---------------------------------------------------------------- protocol arithmetic

std::string arithmetic_suite(Check& c) {
  const auto r = opennod::recall_from_counts(17026, 45570);
  c.expect(r.has_value() && near(100.0 * *r, 37.36, 0.005), "recall 17026/45570");

  // 745 images with 300 predictions each, written and parsed as final.jsonl.
  opennod::GroundTruthSet gt;
  std::ostringstream dump;
  std::mt19937_64 rng(745);
  std::uniform_real_distribution<double> u(0, 1);
  for (opennod::ImageId id = 1; id <= 745; ++id) {
    gt.images[id].info = {id, 640, 480, ""};
    gt.images[id].boxes.push_back({{10, 10, 100, 100}, 0});
    for (int k = 0; k < 300; ++k) {
      const double x = u(rng) * 500, y = u(rng) * 400;
      dump << R"({"image_id":)" << id << R"(,"box":[)" << x << ',' << y << ',' << x + 40 << ',' << y + 30
           << R"(],"score":)" << u(rng) << R"(,"class_id":)" << (k % 3) << R"(,"source":"GD","fallback_flag":false})"
           << '\n';
    }
  }
  std::istringstream in(dump.str());
  const auto dets = opennod::parse_final(in, "synthetic");
  const auto vocab = opennod::ClassVocabulary::from_entries({{0, "a", {}, true}, {1, "b", {}, false}, {2, "c", {}, false}});
  const auto report = opennod::grouped_map(dets, gt, vocab, {.max_dets = 300});
  c.expect(report.pred_count == 223500, "pred_count " + std::to_string(report.pred_count));
  std::ostringstream detail;
  detail << "recall " << std::fixed << std::setprecision(4) << 100.0 * *r << "%, Tot Pred " << report.pred_count;
  return detail.str();
}

// ---------------------------------------------------------------- pipeline

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = testing_support::cli_path() + " " + args + " >>" + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

struct RunReport {
  double novel = -1, known = -1, all = -1;
};

std::string pipeline_suite(Check& c) {
  testing_support::TempDir dir("opennod-acceptance");
  testing_support::copy_fixture(dir.path());
  const auto log = dir / "cli.log";
  const std::string cfg = (dir / "config.json").string();
  const std::string endpoint = testing_support::stub_endpoint(dir.path());

  // Determinism over repeated runs and worker counts.
  std::string reference;
  int runs = 0;
  for (const std::string workers : {"1", "1", "1", "1", "1", "2", "3", "4"}) {
    const auto out = dir / ("final_" + std::to_string(runs++) + ".jsonl");
    const int rc = run_cli("run -q -c " + quote(cfg) + " --backend " + quote(endpoint) + " --workers " + workers +
                               " -o " + quote(out.string()),
                           log);
    c.expect(rc == 0, "run exited with " + std::to_string(rc));
    const std::string text = testing_support::slurp(out);
    c.expect(!text.empty(), "empty final.jsonl");
    if (reference.empty()) reference = text;
    c.expect(text == reference, "final.jsonl differs with --workers " + workers);
  }

  // Pool accounting from the fused dump.
  {
    auto doc = nlohmann::json::parse(testing_support::slurp(cfg));
    doc["fused_dump"] = "fused.jsonl";
    testing_support::write_file(dir / "config_fused.json", doc.dump());
    const int rc = run_cli("run -q -c " + quote((dir / "config_fused.json").string()) + " --backend " +
                               quote(endpoint) + " -o " + quote((dir / "final_fused.jsonl").string()),
                           log);
    c.expect(rc == 0, "fused run failed");
    const auto kn = opennod::load_detections(dir / "dets_kn.jsonl", opennod::SourceTag::KN);
    const auto bg = opennod::load_detections(dir / "dets_bg.jsonl", opennod::SourceTag::BG);
    const auto gd = opennod::load_detections(dir / "dets_gd.jsonl", opennod::SourceTag::GD);
    auto count = [](const opennod::RawByImage& m, opennod::ImageId id) { return m.count(id) ? m.at(id).size() : 0u; };
    std::istringstream lines(testing_support::slurp(dir / "fused.jsonl"));
    std::size_t images = 0;
    for (std::string line; std::getline(lines, line);) {
      const auto j = nlohmann::json::parse(line);
      const opennod::ImageId id = j["image_id"];
      const std::size_t n_kn = j["counts"]["n_kn"], n_bg = j["counts"]["n_bg"], n_gd = j["counts"]["n_gd"];
      const std::size_t n_c = j["detections"].size();
      c.expect(n_c == n_kn + n_bg + n_gd, "N_C != N_KN + N_BG + N_GD on image " + std::to_string(id));
      c.expect(n_kn == count(kn, id) && n_bg == count(bg, id) && n_gd == count(gd, id),
               "pool counts differ from the dumps on image " + std::to_string(id));
      ++images;
    }
    c.expect(images == 3, "fused dump covers " + std::to_string(images) + " images");
  }

  // Component ablations, each run then evaluated through the CLI.
  struct Row {
    std::string name;
    std::string flags;
    std::string endpoint_extra;
  };
  const std::vector<Row> rows{
      {"full", "", ""},
      {"alt-vlm", "", "--model stub-alt --noise 0.35 --seed 19"},
      {"no-sam", "--no-sam", ""},
      {"no-gdino", "--no-gdino", ""},
      {"no-srm", "--no-srm", ""},
      {"no-saeg", "--no-saeg", ""},
      {"no-bg-labelling", "--no-bg-labelling", ""},
  };
  std::map<std::string, RunReport> reports;
  for (const auto& row : rows) {
    const auto out = dir / ("final_" + row.name + ".jsonl");
    const auto rep = dir / ("report_" + row.name);
    const std::string ep = testing_support::stub_endpoint(dir.path(), row.endpoint_extra);
    const int rc = run_cli("run -q -c " + quote(cfg) + " --backend " + quote(ep) + " " + row.flags + " -o " +
                               quote(out.string()),
                           log);
    c.expect(rc == 0, row.name + ": run exited with " + std::to_string(rc));
    const int erc = run_cli("eval -q -c " + quote(cfg) + " -p " + quote(out.string()) + " --report-dir " +
                                quote(rep.string()),
                            log);
    c.expect(erc == 0, row.name + ": eval exited with " + std::to_string(erc));
    const auto j = nlohmann::json::parse(testing_support::slurp(rep / "report.json"));
    RunReport r{j["ap_novel"].get<double>(), j["ap_known"].get<double>(), j["ap_all"].get<double>()};
    for (double v : {r.novel, r.known, r.all}) c.expect(v >= 0.0 && v <= 1.0, row.name + ": AP out of range");
    reports[row.name] = r;
  }
  const auto& full = reports["full"];
  c.expect(full.novel > 0.0, "full configuration finds no novel objects");
  c.expect(reports["no-bg-labelling"].novel == 0.0, "novel AP without BG labelling is not zero");
  for (const char* name : {"no-sam", "no-gdino", "no-srm", "no-saeg"}) {
    c.expect(reports[name].novel <= full.novel + 1e-12, std::string(name) + " beats the full configuration on novel AP");
  }

  std::ostringstream detail;
  detail << std::fixed << std::setprecision(1) << "8 identical runs; novel AP";
  for (const auto& row : rows) detail << " " << row.name << "=" << 100 * reports[row.name].novel;
  return detail.str();
}

// ---------------------------------------------------------------- RLE

std::string rle_suite(Check& c) {
  std::mt19937_64 rng(64);
  std::uniform_int_distribution<std::size_t> dim(1, 64);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t pixels = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t h = dim(rng), w = dim(rng);
    opennod::BinaryMask m(h, w);
    const int style = t % 4;
    const double p = u(rng);
    for (std::size_t col = 0; col < w; ++col) {
      for (std::size_t row = 0; row < h; ++row) {
        bool on = false;
        if (style == 0) on = u(rng) < p;                                   // noise
        if (style == 1) on = row >= h / 4 && row < 3 * h / 4 && col >= w / 3;  // block
        if (style == 2) on = t % 8 == 2;                                    // empty or full
        if (style == 3) on = (row + col) % 2 == 0;                          // checkerboard
        m.set(row, col, on);
      }
    }
    pixels += h * w;
    const auto rle = opennod::encode_rle(m);
    std::uint64_t sum = 0;
    for (auto v : rle.counts) sum += v;
    c.expect(sum == h * w, "counts do not cover the mask");
    c.expect(opennod::decode_rle(rle) == m, "round trip failed on mask " + std::to_string(t));
    c.expect(opennod::encode_rle(opennod::decode_rle(rle)) == rle, "re-encode differs on mask " + std::to_string(t));
  }
  return "1000 masks, " + std::to_string(pixels) + " pixels";
}

}  // namespace

int main() {
  std::cout << "opennod acceptance" << std::endl;
  criterion("SRM exactness and properties", 5.0, srm_suite);
  criterion("SAEG properties", 10.0, saeg_suite);
  criterion("Evaluator matches brute-force oracle", 60.0, evaluator_suite);
  criterion("Protocol arithmetic (recall, Tot Pred)", 0.0, arithmetic_suite);
  criterion("Pipeline determinism, accounting, ablations", 0.0, pipeline_suite);
  criterion("RLE round trip", 5.0, rle_suite);
  std::cout << (g_failed == 0 ? "ALL PASS" : std::to_string(g_failed) + " criterion/criteria FAILED") << std::endl;
  return g_failed == 0 ? 0 : 1;
}
