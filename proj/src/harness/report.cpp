#include "impactbench/harness/report.hpp"

#include <fmt/format.h>

#include <fstream>

#include "impactbench/core/error.hpp"

namespace impactbench::harness {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(fmt::format("report field '{}': {}", key, e.what()));
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

std::vector<double> scales_of(const std::vector<ReportCell>& cells) {
  std::vector<double> scales;
  for (const auto& c : cells) {
    if (c.scale && std::find(scales.begin(), scales.end(), *c.scale) == scales.end()) scales.push_back(*c.scale);
  }
  return scales;
}

std::vector<std::string> explainers_of(const std::vector<ReportCell>& cells) {
  std::vector<std::string> names;
  for (const auto& c : cells) {
    if (std::find(names.begin(), names.end(), c.explainer) == names.end()) names.push_back(c.explainer);
  }
  return names;
}

}  // namespace

json mask_to_json(const BinaryMask& mask) {
  return {{"height", mask.height()}, {"width", mask.width()}, {"pixels", mask.set_pixels()}};
}

BinaryMask mask_from_json(const json& j) {
  return BinaryMask::from_pixels(field<int>(j, "height"), field<int>(j, "width"),
                                 field<std::vector<std::size_t>>(j, "pixels"));
}

json record_to_json(const EvalRecord& r) {
  json j{{"image_id", r.image_id}, {"y", r.y}, {"z", r.z}, {"y_prime", r.y_prime}, {"z_prime", r.z_prime}};
  if (r.z_prime_argmax) j["z_prime_argmax"] = *r.z_prime_argmax;
  if (r.coverage) j["coverage"] = {{"impacted", mask_to_json(r.coverage->impacted)}, {"critical", mask_to_json(r.coverage->critical)}};
  if (r.attack_target) j["attack_target"] = *r.attack_target;
  if (r.patched_label) j["patched_label"] = *r.patched_label;
  return j;
}

EvalRecord record_from_json(const json& j) {
  EvalRecord r;
  r.image_id = field<std::string>(j, "image_id");
  r.y = field<int>(j, "y");
  r.z = field<double>(j, "z");
  r.y_prime = field<int>(j, "y_prime");
  r.z_prime = field<double>(j, "z_prime");
  r.z_prime_argmax = optional_field<double>(j, "z_prime_argmax");
  if (j.contains("coverage")) {
    const json& c = j.at("coverage");
    r.coverage = CoveragePair{mask_from_json(c.at("impacted")), mask_from_json(c.at("critical"))};
  }
  r.attack_target = optional_field<int>(j, "attack_target");
  r.patched_label = optional_field<int>(j, "patched_label");
  return r;
}

json metrics_to_json(const metrics::MetricsReport& m) {
  json flags = json::array();
  for (const auto& f : m.flags) {
    json fj{{"decision_flip", f.decision_flip}, {"confidence_drop", f.confidence_drop}};
    if (f.iou) fj["iou"] = *f.iou;
    if (f.empty_union) fj["empty_union"] = true;
    flags.push_back(fj);
  }
  json j{{"n", m.n}, {"I", m.impact_score}, {"I_strict", m.impact_strict}, {"flags", flags}};
  if (m.impact_coverage) j["I_coverage"] = *m.impact_coverage;
  if (m.impact_score_argmax_variant) j["I_argmax_variant"] = *m.impact_score_argmax_variant;
  return j;
}

metrics::MetricsReport metrics_from_json(const json& j) {
  metrics::MetricsReport m;
  m.n = field<std::size_t>(j, "n");
  m.impact_score = field<double>(j, "I");
  m.impact_strict = field<double>(j, "I_strict");
  m.impact_coverage = optional_field<double>(j, "I_coverage");
  m.impact_score_argmax_variant = optional_field<double>(j, "I_argmax_variant");
  for (const json& fj : j.at("flags")) {
    metrics::RecordFlags f;
    f.decision_flip = field<bool>(fj, "decision_flip");
    f.confidence_drop = field<bool>(fj, "confidence_drop");
    f.iou = optional_field<double>(fj, "iou");
    f.empty_union = fj.value("empty_union", false);
    m.flags.push_back(f);
  }
  return m;
}

json result_to_json(const ExperimentResult& result) {
  json cells = json::array();
  for (const auto& c : result.cells) {
    json cj{{"explainer", c.explainer}, {"scale", c.scale ? json(*c.scale) : json(nullptr)}};
    cj["report"] = c.report ? metrics_to_json(*c.report) : json(nullptr);
    json records = json::array();
    for (const auto& r : c.records) records.push_back(record_to_json(r));
    cj["records"] = records;
    cells.push_back(cj);
  }
  return {{"format", "impactbench-report"}, {"version", 1}, {"manifest", result.manifest.to_json()}, {"cells", cells}};
}

ExperimentResult result_from_json(const json& j) {
  if (j.value("format", "") != "impactbench-report") throw IoError("not an impactbench report");
  ExperimentResult result;
  const json& m = j.at("manifest");
  auto& man = result.manifest;
  man.experiment = field<std::string>(m, "experiment");
  man.config_hash = field<std::string>(m, "config_hash");
  man.version = field<std::string>(m, "version");
  man.seed = field<std::uint64_t>(m, "seed");
  man.reference = m.value("reference", "");
  man.images_total = field<std::size_t>(m.at("images"), "total");
  man.images_correct = field<std::size_t>(m.at("images"), "correct");
  man.images_aborted = field<std::size_t>(m.at("images"), "aborted");
  if (m.contains("attacks")) {
    for (const json& a : m.at("attacks")) {
      man.attacks.push_back({field<double>(a, "scale"), field<std::size_t>(a, "attempts"), field<std::size_t>(a, "successes")});
    }
  }
  if (m.contains("timings_ms")) {
    for (const auto& [stage, ms] : m.at("timings_ms").items()) man.timings_ms.emplace_back(stage, ms.get<double>());
  }
  for (const json& a : m.at("artifacts")) {
    man.artifacts.push_back({field<std::string>(a, "image_id"), field<std::string>(a, "path")});
  }
  for (const json& cj : j.at("cells")) {
    ReportCell c;
    c.explainer = field<std::string>(cj, "explainer");
    c.scale = optional_field<double>(cj, "scale");
    if (!cj.at("report").is_null()) c.report = metrics_from_json(cj.at("report"));
    for (const json& rj : cj.at("records")) c.records.push_back(record_from_json(rj));
    result.cells.push_back(std::move(c));
  }
  return result;
}

std::string format_percent(double fraction) { return fmt::format("{:.2f}%", fraction * 100.0); }

std::string format_impact_pair(const metrics::MetricsReport& report) {
  return format_percent(report.impact_score) + " / " + format_percent(report.impact_strict);
}

std::string format_csv(const std::vector<ReportCell>& cells) {
  std::string out = "explainer,scale,n,I,I_strict,I_coverage\n";
  for (const auto& c : cells) {
    const std::string scale = c.scale ? fmt::format("{}", *c.scale) : "";
    if (!c.report) {
      out += fmt::format("{},{},0,n/a,n/a,n/a\n", c.explainer, scale);
      continue;
    }
    const auto& r = *c.report;
    const std::string coverage = r.impact_coverage ? fmt::format("{:.6f}", *r.impact_coverage) : "n/a";
    out += fmt::format("{},{},{},{:.6f},{:.6f},{}\n", c.explainer, scale, r.n, r.impact_score, r.impact_strict, coverage);
  }
  return out;
}

std::string format_markdown(const ExperimentResult& result) {
  const auto& cells = result.cells;
  const auto names = explainers_of(cells);
  const auto scales = scales_of(cells);
  std::string out;
  if (scales.empty()) {
    out += "| Method | I / I_strict | n |\n|---|---|---|\n";
    for (const auto& c : cells) {
      out += fmt::format("| {} | {} | {} |\n", c.explainer, c.report ? format_impact_pair(*c.report) : "n/a",
                         c.report ? c.report->n : 0);
    }
    return out;
  }
  out += "| Scale |";
  std::string rule = "|---|";
  for (const auto& name : names) {
    out += fmt::format(" {} I_coverage | {} I / I_strict | {} n |", name, name, name);
    rule += "---|---|---|";
  }
  out += "\n" + rule + "\n";
  for (double scale : scales) {
    out += fmt::format("| {} |", scale);
    for (const auto& name : names) {
      const auto it = std::find_if(cells.begin(), cells.end(),
                                   [&](const ReportCell& c) { return c.explainer == name && c.scale == scale; });
      if (it == cells.end() || !it->report) {
        out += " n/a | n/a | 0 |";
        continue;
      }
      const auto& r = *it->report;
      out += fmt::format(" {} | {} | {} |", r.impact_coverage ? format_percent(*r.impact_coverage) : "n/a",
                         format_impact_pair(r), r.n);
    }
    out += "\n";
  }
  return out;
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& dir) {
  if (result.cells.empty()) throw ConfigError("nothing to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  write_text(dir / "report.json", result_to_json(result).dump(1) + "\n");
  write_text(dir / "report.csv", format_csv(result.cells));
  write_text(dir / "report.md", format_markdown(result));
  write_text(dir / "manifest.json", result.manifest.to_json().dump(1) + "\n");
}

}  // namespace impactbench::harness
