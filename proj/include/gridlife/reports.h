#ifndef GRIDLIFE_REPORTS_H
#define GRIDLIFE_REPORTS_H

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridlife/degradation_dataset.h"
#include "gridlife/lifecycle.h"
#include "gridlife/quantile_gbt.h"
#include "gridlife/tuner.h"

namespace gridlife::reports {

inline constexpr const char* kToolVersion = "gridlife 1.0.0";

struct IntervalRow {
  data::AgingMode mode = data::AgingMode::kCyclic;
  double actual = 0.0;
  std::vector<double> predicted;  // one per quantile, ascending
};

/// Test samples of `mode` with their predicted quantiles, sorted by the
/// actual rate (ties keep input order).
std::vector<IntervalRow> sorted_prediction_intervals(const gbt::RateModel& model,
                                                     std::span<const data::DegradationSample> samples,
                                                     data::AgingMode mode);
void write_prediction_intervals(const std::filesystem::path& path, std::span<const double> quantiles,
                                std::span<const IntervalRow> rows);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins spanning [min, max] of `values`; the last bin is closed.
std::vector<HistogramBin> histogram(std::span<const double> values, int bins);
void write_histogram(const std::filesystem::path& path, std::span<const HistogramBin> bins);

/// Capacity against elapsed days: the worst-case path (when given) followed
/// by each Monte Carlo path. Each path starts at day 0 with the rated capacity.
void write_capacity_curves(const std::filesystem::path& path, const lifecycle::LifecycleTrace* worst_case,
                           std::span<const lifecycle::LifecycleTrace> monte_carlo, double c0_kwh, double gamma_days);

struct Table1Row {
  std::string policy;
  dispatch::ThetaVector theta;
  double cost_q90 = 0.0;
  double cost_q95 = 0.0;
  double mean_life_days = 0.0;
};

const std::vector<std::string>& table1_header();
Table1Row table1_row(const tuner::PolicyResult& result);
void write_table1(const std::filesystem::path& path, std::span<const Table1Row> rows);
std::vector<Table1Row> read_table1(const std::filesystem::path& path);

void write_sweep(const std::filesystem::path& path, tuner::SweepAxis axis, std::span<const tuner::SweepRow> rows);
void write_convergence(const std::filesystem::path& path, const tuner::PsoResult& result);

// Record of one command run: inputs and outputs with digests, seeds and
// settings. Wall-clock timings are included only on request because they
// differ between reruns.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_timing(const std::string& step, double seconds) { timings_[step] = seconds; }
  void record_timings(bool on) { record_timings_ = on; }

  nlohmann::json to_json() const;
  /// Writes the manifest; its own path is not listed among the outputs.
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::uint64_t seed_ = 0;
  std::map<std::string, nlohmann::json> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::map<std::string, nlohmann::json> extra_;
  std::map<std::string, double> timings_;
  bool record_timings_ = false;
};

/// Writes `doc` as indented JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// simulate output (schema simulation-v1): the worst-case trace plus the
/// Monte Carlo summary and its paths.
nlohmann::json simulation_document(const std::string& policy, const dispatch::ThetaVector& theta,
                                   const lifecycle::LifecycleConfig& config, double quantile,
                                   const lifecycle::LifecycleTrace& worst_case,
                                   const lifecycle::MonteCarloSummary& monte_carlo);

/// theta.json (schema theta-v1).
nlohmann::json theta_document(tuner::PolicyKind kind, const tuner::PsoResult& result);
/// Reads "efc,dod,c,d" or a theta.json file.
dispatch::ThetaVector read_theta(const std::string& text_or_path);

struct ReportInputs {
  std::optional<std::filesystem::path> samples;  // held-out samples.csv
  std::optional<std::filesystem::path> model_cyclic;
  std::optional<std::filesystem::path> model_calendar;
  std::optional<std::filesystem::path> trace;   // simulate output
  std::optional<std::filesystem::path> table1;  // compare output
  int histogram_bins = 20;
};

/// Figure-ready files in `out_dir` plus manifest.json. Throws DataError
/// naming every absent input file when any requested file is missing, and
/// ConfigError when nothing was requested.
std::vector<std::filesystem::path> emit_report(const ReportInputs& inputs, const std::filesystem::path& out_dir,
                                               std::uint64_t seed);

}  // namespace gridlife::reports

#endif  // GRIDLIFE_REPORTS_H
