#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace irislab {

inline constexpr int kMetricsSchemaVersion = 1;

struct MetricsRecord {
  std::int64_t step = 0;
  double mean_intrinsic_return = 0.0;
  double mean_sc_text = 0.0;   // nats per text token
  double mean_sc_image = 0.0;  // nats per image token
  double mean_oracle_reward = 0.0;
  double mean_color_entropy = 0.0;
  double clip_fraction = 0.0;
  double mean_kl_to_ref = 0.0;
  double grad_norm = 0.0;
  double degenerate_group_fraction = 0.0;
  std::int64_t wall_ms = 0;
  // Nested sub-objects (e.g. "eval", "diagnostics"), serialized after the
  // scalar fields in insertion order.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static MetricsRecord from_json(const nlohmann::json& j);
};

struct MetricSeries {
  std::string_view name;
  std::string_view unit;
};

// The ten plotted metric fields, in canonical order.
const std::array<MetricSeries, 10>& metric_series();
double metric_value(const MetricsRecord& r, std::string_view name);

// Creates/truncates the log and writes the {"schema_version": 1} header line.
void start_metrics_log(const std::filesystem::path& log_path);

// Appends one canonical JSON line and fsyncs. Rejects non-finite fields
// before touching the file.
void append_record(const MetricsRecord& record, const std::filesystem::path& log_path);

// Appends with a strictly increasing step check.
class MetricsWriter {
 public:
  explicit MetricsWriter(std::filesystem::path log_path);
  void append(const MetricsRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::int64_t last_step_ = -1;
  bool any_ = false;
};

struct MetricsLog {
  int schema_version = 0;
  std::vector<MetricsRecord> records;
};

MetricsLog read_metrics(const std::filesystem::path& log_path);

struct RenderOptions {
  int smoothing_window = 1;  // trailing moving average; 1 renders raw values
};

/// One self-contained SVG line chart per metric field. Throws
/// std::runtime_error("no data") for a log without records.
std::vector<std::filesystem::path> render_curves(const std::filesystem::path& log_path,
                                                 const std::filesystem::path& out_dir,
                                                 const RenderOptions& options = {});

std::string render_svg(std::string_view metric, std::string_view unit, const std::vector<double>& steps,
                       const std::vector<double>& values);

}  // namespace irislab
