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

#include "opennod/report.hpp"

#include <cstdio>
#include <json.hpp>
#include <sstream>

namespace opennod {

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& r, std::string_view mode) {
  json classes = json::array();
  for (const auto& c : r.per_class) {
    classes.push_back({{"class_id", c.class_id},
                       {"name", c.name},
                       {"known", c.known},
                       {"n_gt", c.n_gt},
                       {"n_det", c.n_det},
                       {"ap", opt(c.ap)},
                       {"ap50", opt(c.ap50)}});
  }
  const json doc{{"mode", mode},
                 {"max_dets", r.max_dets},
                 {"ap_novel", opt(r.ap_novel)},
                 {"ap_known", opt(r.ap_known)},
                 {"ap_all", opt(r.ap_all)},
                 {"ap50_novel", opt(r.ap50_novel)},
                 {"ap50_known", opt(r.ap50_known)},
                 {"ap50_all", opt(r.ap50_all)},
                 {"recall_05", opt(r.recall_05)},
                 {"tp_count", r.tp_count},
                 {"gt_count", r.gt_count},
                 {"pred_count", r.pred_count},
                 {"per_class", classes},
                 {"warnings", r.warnings},
                 {"notes", r.notes}};
  return doc.dump(2) + "\n";
}

std::string report_to_markdown(const EvalReport& r, std::string_view mode, bool ap50_table) {
  std::ostringstream md;
  md << "# Evaluation report (" << mode << ", top " << r.max_dets << " per image)\n\n";
  md << "| AP (Novel) | AP (Known) | AP (All) |\n|---:|---:|---:|\n";
  md << "| " << pct(r.ap_novel) << " | " << pct(r.ap_known) << " | " << pct(r.ap_all) << " |\n\n";
  if (ap50_table) {
    md << "| AP50 (Novel) | AP50 (Known) | AP50 (All) |\n|---:|---:|---:|\n";
    md << "| " << pct(r.ap50_novel) << " | " << pct(r.ap50_known) << " | " << pct(r.ap50_all) << " |\n\n";
  }
  md << "| Recall@0.5 (%) | Num TP | Num GT | Tot Pred |\n|---:|---:|---:|---:|\n";
  md << "| " << pct(r.recall_05) << " | " << r.tp_count << " | " << r.gt_count << " | " << r.pred_count << " |\n\n";
  for (const auto& n : r.notes) md << "- note: " << n << "\n";
  for (const auto& w : r.warnings) md << "- warning: " << w << "\n";
  if (!r.notes.empty() || !r.warnings.empty()) md << "\n";
  md << "## Per-class AP\n\n| id | name | group | GT | dets | AP | AP50 |\n|---:|---|---|---:|---:|---:|---:|\n";
  for (const auto& c : r.per_class) {
    if (c.n_gt == 0 && c.n_det == 0) continue;
    md << "| " << c.class_id << " | " << c.name << " | " << (c.known ? "known" : "novel") << " | " << c.n_gt
       << " | " << c.n_det << " | " << pct(c.ap) << " | " << pct(c.ap50) << " |\n";
  }
  return md.str();
}

}  // namespace opennod
