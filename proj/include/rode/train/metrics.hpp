#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rode {

/// Append-only, line-delimited metrics log. One JSON object per line with
/// sorted keys and no timestamps, so identical runs produce byte-identical
/// files. Every record carries the schema version and a monotone step field.
class MetricsWriter {
 public:
  static constexpr int kSchemaVersion = 1;

  explicit MetricsWriter(std::ostream& out) : out_(&out) {}

  /// `fields` must contain a numeric "step"; "schema" is injected.
  void record(nlohmann::json fields) {
    if (!fields.is_object() || !fields.contains("step") || !fields.at("step").is_number())
      throw std::runtime_error("metrics: record needs a numeric \"step\" field");
    const std::int64_t step = fields.at("step").get<std::int64_t>();
    if (step < last_step_)
      throw std::runtime_error("metrics: step went backwards (" + std::to_string(step) +
                               " after " + std::to_string(last_step_) + ")");
    last_step_ = step;
    fields["schema"] = kSchemaVersion;
    // nlohmann objects iterate in key order, so dump() is deterministic.
    (*out_) << fields.dump() << '\n';
    out_->flush();
    ++count_;
  }

  std::int64_t last_step() const { return last_step_; }
  std::int64_t count() const { return count_; }

 private:
  std::ostream* out_;
  std::int64_t last_step_ = 0;
  std::int64_t count_ = 0;
};

struct ParsedMetrics {
  std::vector<nlohmann::json> records;
  int skipped = 0;  // malformed lines
};

/// Reads a metrics stream back, skipping (and counting) malformed lines.
inline ParsedMetrics parse_metrics(std::istream& in) {
  ParsedMetrics out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("step") ||
        !j.at("step").is_number()) {
      ++out.skipped;
      continue;
    }
    out.records.push_back(std::move(j));
  }
  return out;
}

}  // namespace rode
