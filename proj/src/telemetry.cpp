#include "irislab/telemetry.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>

namespace irislab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array<MetricSeries, 10> kSeries = {{
    {"mean_intrinsic_return", "nats per trajectory"},
    {"mean_sc_text", "nats per token"},
    {"mean_sc_image", "nats per token"},
    {"mean_oracle_reward", "score in [0, 1]"},
    {"mean_color_entropy", "nats"},
    {"clip_fraction", "fraction of tokens"},
    {"mean_kl_to_ref", "nats per token"},
    {"grad_norm", "L2 norm"},
    {"degenerate_group_fraction", "fraction of groups"},
    {"wall_ms", "milliseconds"},
}};

void write_all(const std::filesystem::path& path, std::string_view text, int flags) {
  const int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) throw std::runtime_error(fmt::format("{}: {}", path.string(), std::strerror(errno)));
  std::size_t off = 0;
  while (off < text.size()) {
    const ssize_t n = ::write(fd, text.data() + off, text.size() - off);
    if (n < 0) {
      const int err = errno;
      ::close(fd);
      throw std::runtime_error(fmt::format("{}: {}", path.string(), std::strerror(err)));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), std::strerror(errno)));
  }
}

}  // namespace

const std::array<MetricSeries, 10>& metric_series() { return kSeries; }

double metric_value(const MetricsRecord& r, std::string_view name) {
  if (name == "mean_intrinsic_return") return r.mean_intrinsic_return;
  if (name == "mean_sc_text") return r.mean_sc_text;
  if (name == "mean_sc_image") return r.mean_sc_image;
  if (name == "mean_oracle_reward") return r.mean_oracle_reward;
  if (name == "mean_color_entropy") return r.mean_color_entropy;
  if (name == "clip_fraction") return r.clip_fraction;
  if (name == "mean_kl_to_ref") return r.mean_kl_to_ref;
  if (name == "grad_norm") return r.grad_norm;
  if (name == "degenerate_group_fraction") return r.degenerate_group_fraction;
  if (name == "wall_ms") return static_cast<double>(r.wall_ms);
  throw std::invalid_argument("unknown metric " + std::string(name));
}

ordered_json MetricsRecord::to_json() const {
  ordered_json j;
  j["step"] = step;
  j["mean_intrinsic_return"] = mean_intrinsic_return;
  j["mean_sc_text"] = mean_sc_text;
  j["mean_sc_image"] = mean_sc_image;
  j["mean_oracle_reward"] = mean_oracle_reward;
  j["mean_color_entropy"] = mean_color_entropy;
  j["clip_fraction"] = clip_fraction;
  j["mean_kl_to_ref"] = mean_kl_to_ref;
  j["grad_norm"] = grad_norm;
  j["degenerate_group_fraction"] = degenerate_group_fraction;
  j["wall_ms"] = wall_ms;
  for (const auto& [key, value] : extra.items()) j[key] = value;
  return j;
}

MetricsRecord MetricsRecord::from_json(const json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.mean_intrinsic_return = j.at("mean_intrinsic_return").get<double>();
  r.mean_sc_text = j.at("mean_sc_text").get<double>();
  r.mean_sc_image = j.at("mean_sc_image").get<double>();
  r.mean_oracle_reward = j.at("mean_oracle_reward").get<double>();
  r.mean_color_entropy = j.at("mean_color_entropy").get<double>();
  r.clip_fraction = j.at("clip_fraction").get<double>();
  r.mean_kl_to_ref = j.at("mean_kl_to_ref").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.degenerate_group_fraction = j.at("degenerate_group_fraction").get<double>();
  r.wall_ms = j.at("wall_ms").get<std::int64_t>();
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) r.extra[key] = value;
  }
  return r;
}

void start_metrics_log(const std::filesystem::path& log_path) {
  if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
  const std::string header = ordered_json{{"schema_version", kMetricsSchemaVersion}}.dump() + "\n";
  write_all(log_path, header, O_WRONLY | O_CREAT | O_TRUNC);
}

void append_record(const MetricsRecord& record, const std::filesystem::path& log_path) {
  for (const auto& s : kSeries) {
    if (!std::isfinite(metric_value(record, s.name))) {
      throw std::invalid_argument(fmt::format("metrics record field {} is not finite", s.name));
    }
  }
  if (record.clip_fraction < 0.0 || record.clip_fraction > 1.0) {
    throw std::invalid_argument("clip_fraction must lie in [0, 1]");
  }
  std::string line;
  try {
    line = record.to_json().dump() + "\n";
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(fmt::format("metrics record not serializable: {}", e.what()));
  }
  write_all(log_path, line, O_WRONLY | O_CREAT | O_APPEND);
}

MetricsWriter::MetricsWriter(std::filesystem::path log_path) : path_(std::move(log_path)) {
  start_metrics_log(path_);
}

void MetricsWriter::append(const MetricsRecord& record) {
  if (any_ && record.step <= last_step_) throw std::invalid_argument("metrics step must strictly increase");
  append_record(record, path_);
  last_step_ = record.step;
  any_ = true;
}

MetricsLog read_metrics(const std::filesystem::path& log_path) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open metrics log " + log_path.string());
  MetricsLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", log_path.string(), line_no, e.what()));
    }
    if (line_no == 1 && j.contains("schema_version")) {
      log.schema_version = j["schema_version"].get<int>();
      continue;
    }
    log.records.push_back(MetricsRecord::from_json(j));
  }
  return log;
}

std::string render_svg(std::string_view metric, std::string_view unit, const std::vector<double>& steps,
                       const std::vector<double>& values) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 80, kRight = 20, kTop = 40, kBottom = 60;
  const auto [xmin_it, xmax_it] = std::minmax_element(steps.begin(), steps.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(values.begin(), values.end());
  double xmin = *xmin_it, xmax = *xmax_it, ymin = *ymin_it, ymax = *ymax_it;
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    const double pad = std::max(std::abs(ymin) * 0.05, 1e-12);
    ymin -= pad;
    ymax += pad;
  }
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * plot_h; };

  std::string points;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) points += ' ';
    points += fmt::format("{:.3f},{:.3f}", px(steps[i]), py(values[i]));
  }

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n", kWidth,
      kHeight);
  svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
                     kWidth / 2, metric);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft,
                     kTop + plot_h, kLeft + plot_w);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                     kTop + plot_h);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">step</text>\n",
                     kLeft + plot_w / 2, kHeight - 16);
  svg += fmt::format(
      "<text x=\"18\" y=\"{0}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 18 {0})\">{1} ({2})</text>\n",
      kTop + plot_h / 2, metric, unit);
  auto tick = [&](double x, double y, std::string_view anchor, double v) {
    svg += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"{}\">{:.6g}</text>\n",
                       x, y, anchor, v);
  };
  tick(kLeft, kTop + plot_h + 16, "start", xmin);
  tick(kLeft + plot_w, kTop + plot_h + 16, "end", xmax);
  tick(kLeft - 6, kTop + plot_h, "end", ymin);
  tick(kLeft - 6, kTop + 10, "end", ymax);
  svg += fmt::format("<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n", points);
  svg += "</svg>\n";
  return svg;
}

std::vector<std::filesystem::path> render_curves(const std::filesystem::path& log_path,
                                                 const std::filesystem::path& out_dir,
                                                 const RenderOptions& options) {
  const MetricsLog log = read_metrics(log_path);
  if (log.records.empty()) throw std::runtime_error("no data");
  if (options.smoothing_window < 1) throw std::invalid_argument("smoothing window must be >= 1");
  std::filesystem::create_directories(out_dir);

  std::vector<double> steps;
  for (const auto& r : log.records) steps.push_back(static_cast<double>(r.step));

  std::vector<std::filesystem::path> written;
  for (const auto& series : kSeries) {
    std::vector<double> raw;
    for (const auto& r : log.records) raw.push_back(metric_value(r, series.name));
    std::vector<double> values(raw.size());
    const auto w = static_cast<std::size_t>(options.smoothing_window);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
      double sum = 0.0;
      for (std::size_t j = lo; j <= i; ++j) sum += raw[j];
      values[i] = sum / static_cast<double>(i - lo + 1);
    }
    const auto path = out_dir / (std::string(series.name) + ".svg");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << render_svg(series.name, series.unit, steps, values);
    if (!out) throw std::runtime_error("write failed for " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace irislab
