#include "gridlife/reports.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "gridlife/config.h"
#include "gridlife/csv.h"
#include "gridlife/error.h"

namespace gridlife::reports {
namespace {

using csv::format_number;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<std::string> theta_cells(const dispatch::ThetaVector& t) {
  return {format_number(t.efc), format_number(t.dod), format_number(t.c), format_number(t.d)};
}

std::string quantile_label(double q) { return "q_" + format_number(q); }

}  // namespace

std::vector<IntervalRow> sorted_prediction_intervals(const gbt::RateModel& model,
                                                     std::span<const data::DegradationSample> samples,
                                                     data::AgingMode mode) {
  std::vector<IntervalRow> rows;
  for (const auto& s : samples) {
    if (s.mode != mode) continue;
    IntervalRow r;
    r.mode = mode;
    r.actual = s.rate;
    std::vector<double> x = gbt::features_of(s);
    r.predicted = model.predict_quantiles(x);
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.actual < b.actual; });
  return rows;
}

void write_prediction_intervals(const std::filesystem::path& path, std::span<const double> quantiles,
                                std::span<const IntervalRow> rows) {
  auto out = open_out(path);
  csv::Writer w(out);
  std::vector<std::string> header{"rank", "mode", "actual"};
  for (double q : quantiles) header.push_back(quantile_label(q));
  w.row(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].predicted.size() != quantiles.size()) throw DataError("interval row width does not match quantiles");
    std::vector<std::string> cells{std::to_string(i), data::to_string(rows[i].mode), format_number(rows[i].actual)};
    for (double p : rows[i].predicted) cells.push_back(format_number(p));
    w.row(cells);
  }
}

std::vector<HistogramBin> histogram(std::span<const double> values, int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<HistogramBin> out(bins);
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  for (int b = 0; b < bins; ++b) {
    out[b].lo = lo + b * width;
    out[b].hi = b + 1 == bins ? (hi > lo ? hi : lo + width) : lo + (b + 1) * width;
  }
  for (double v : values) {
    int b = hi > lo ? static_cast<int>((v - lo) / width) : 0;
    b = std::clamp(b, 0, bins - 1);
    ++out[b].count;
  }
  return out;
}

void write_histogram(const std::filesystem::path& path, std::span<const HistogramBin> bins) {
  auto out = open_out(path);
  csv::Writer w(out);
  w.row(std::vector<std::string>{"bin_lo", "bin_hi", "count"});
  for (const auto& b : bins) w.row({format_number(b.lo), format_number(b.hi), std::to_string(b.count)});
}

void write_capacity_curves(const std::filesystem::path& path, const lifecycle::LifecycleTrace* worst_case,
                           std::span<const lifecycle::LifecycleTrace> monte_carlo, double c0_kwh, double gamma_days) {
  auto out = open_out(path);
  csv::Writer w(out);
  w.row(std::vector<std::string>{"path", "period", "day", "capacity_kwh"});
  auto emit = [&](const std::string& name, const lifecycle::LifecycleTrace& t) {
    w.row({name, "0", "0", format_number(c0_kwh)});
    for (const auto& r : t.records) {
      w.row({name, std::to_string(r.period), format_number(r.period * gamma_days), format_number(r.capacity_out)});
    }
  };
  if (worst_case) emit("worst_case", *worst_case);
  for (std::size_t k = 0; k < monte_carlo.size(); ++k) emit("mc_" + std::to_string(k), monte_carlo[k]);
}

const std::vector<std::string>& table1_header() {
  static const std::vector<std::string> h{"policy",  "theta_efc", "theta_dod", "theta_c",
                                          "theta_d", "cost_q90",  "cost_q95",  "mean_life_days"};
  return h;
}

Table1Row table1_row(const tuner::PolicyResult& result) {
  return {tuner::to_string(result.kind), result.theta, result.cost_q90, result.cost_q95, result.mean_life_days};
}

void write_table1(const std::filesystem::path& path, std::span<const Table1Row> rows) {
  auto out = open_out(path);
  csv::Writer w(out);
  w.row(table1_header());
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.policy};
    for (auto& c : theta_cells(r.theta)) cells.push_back(std::move(c));
    cells.push_back(format_number(r.cost_q90));
    cells.push_back(format_number(r.cost_q95));
    cells.push_back(format_number(r.mean_life_days));
    w.row(cells);
  }
}

std::vector<Table1Row> read_table1(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::require_header(table, table1_header());
  std::vector<Table1Row> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    Table1Row r;
    r.policy = table.rows[i].at(0);
    r.theta = {table.number(i, 1), table.number(i, 2), table.number(i, 3), table.number(i, 4)};
    r.cost_q90 = table.number(i, 5);
    r.cost_q95 = table.number(i, 6);
    r.mean_life_days = table.number(i, 7);
    rows.push_back(r);
  }
  return rows;
}

void write_sweep(const std::filesystem::path& path, tuner::SweepAxis axis, std::span<const tuner::SweepRow> rows) {
  auto out = open_out(path);
  csv::Writer w(out);
  w.row(std::vector<std::string>{tuner::to_string(axis), "theta_efc", "theta_dod", "theta_c", "theta_d", "objective",
                                 "mean_life_days"});
  for (const auto& r : rows) {
    std::vector<std::string> cells{format_number(r.value)};
    for (auto& c : theta_cells(r.theta)) cells.push_back(std::move(c));
    cells.push_back(format_number(r.objective));
    cells.push_back(format_number(r.mean_life_days));
    w.row(cells);
  }
}

void write_convergence(const std::filesystem::path& path, const tuner::PsoResult& result) {
  auto out = open_out(path);
  csv::Writer w(out);
  w.row(std::vector<std::string>{"iteration", "best_cost", "theta_efc", "theta_dod", "theta_c", "theta_d",
                                 "mean_cost", "invalid"});
  for (const auto& it : result.log) {
    std::vector<std::string> cells{std::to_string(it.iteration), format_number(it.best_cost)};
    for (double v : it.best) cells.push_back(format_number(v));
    cells.push_back(format_number(it.mean_cost));
    cells.push_back(std::to_string(it.invalid));
    w.row(cells);
  }
}

void Manifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_[role] = {{"path", path.generic_string()}, {"digest", config::file_digest(path)}};
}

void Manifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

nlohmann::json Manifest::to_json() const {
  nlohmann::json doc;
  doc["schema_version"] = "manifest-v1";
  doc["tool_version"] = kToolVersion;
  doc["command"] = command_;
  doc["seed"] = seed_;
  doc["inputs"] = nlohmann::json::object();
  for (const auto& [role, entry] : inputs_) doc["inputs"][role] = entry;
  doc["outputs"] = nlohmann::json::array();
  for (const auto& p : outputs_) {
    doc["outputs"].push_back({{"path", p.generic_string()}, {"digest", config::file_digest(p)}});
  }
  doc["settings"] = nlohmann::json::object();
  for (const auto& [k, v] : extra_) doc["settings"][k] = v;
  if (record_timings_) {
    doc["timings_s"] = nlohmann::json::object();
    for (const auto& [k, v] : timings_) doc["timings_s"][k] = v;
  }
  return doc;
}

void Manifest::write(const std::filesystem::path& path) const { write_json(path, to_json()); }

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

nlohmann::json simulation_document(const std::string& policy, const dispatch::ThetaVector& theta,
                                   const lifecycle::LifecycleConfig& config, double quantile,
                                   const lifecycle::LifecycleTrace& worst_case,
                                   const lifecycle::MonteCarloSummary& mc) {
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : mc.paths) paths.push_back(p.to_json());
  return {{"schema_version", "simulation-v1"},
          {"policy", policy},
          {"theta", theta.as_array()},
          {"quantile", quantile},
          {"config", config.to_json()},
          {"worst_case", worst_case.to_json()},
          {"worst_case_life_days", worst_case.life_days(config.gamma_days)},
          {"monte_carlo",
           {{"n_paths", mc.paths.size()},
            {"mean_life_days", mc.mean_life_days},
            {"mean_cost_usd", mc.mean_cost},
            {"cost_q90_usd", mc.cost_q90},
            {"cost_q95_usd", mc.cost_q95},
            {"transitions", mc.transitions},
            {"dominated", mc.dominated},
            {"dominance_rate", mc.dominance_rate()},
            {"paths", std::move(paths)}}}};
}

nlohmann::json theta_document(tuner::PolicyKind kind, const tuner::PsoResult& result) {
  return {{"schema_version", "theta-v1"},
          {"policy", tuner::to_string(kind)},
          {"theta", result.best},
          {"objective", result.best_cost},
          {"evaluations", result.evaluations},
          {"iterations", result.log.empty() ? 0 : result.log.back().iteration}};
}

dispatch::ThetaVector read_theta(const std::string& text) {
  if (std::filesystem::is_regular_file(text)) {
    const auto doc = read_json(text);
    try {
      if (doc.at("schema_version").get<std::string>() != "theta-v1") throw DataError(text + ": not a theta file");
      const auto v = doc.at("theta").get<std::vector<double>>();
      auto theta = dispatch::ThetaVector::from_array(v);
      theta.validate();
      return theta;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(text + ": " + e.what());
    }
  }
  return dispatch::ThetaVector::parse(text);
}

std::vector<std::filesystem::path> emit_report(const ReportInputs& in, const std::filesystem::path& out_dir,
                                               std::uint64_t seed) {
  std::vector<std::pair<std::string, std::filesystem::path>> requested;
  if (in.samples) requested.emplace_back("samples", *in.samples);
  if (in.model_cyclic) requested.emplace_back("model_cyclic", *in.model_cyclic);
  if (in.model_calendar) requested.emplace_back("model_calendar", *in.model_calendar);
  if (in.trace) requested.emplace_back("trace", *in.trace);
  if (in.table1) requested.emplace_back("table1", *in.table1);
  if (requested.empty()) throw ConfigError("report: no inputs given");

  std::string missing;
  for (const auto& [role, p] : requested) {
    if (!std::filesystem::is_regular_file(p)) missing += (missing.empty() ? "" : ", ") + role + "=" + p.string();
  }
  if (!missing.empty()) throw DataError("report: missing input artifacts: " + missing);
  const bool has_model = in.model_cyclic || in.model_calendar;
  if (in.samples.has_value() != has_model) {
    throw ConfigError("report: prediction intervals need both held-out samples and at least one model");
  }

  Manifest manifest("report");
  manifest.set_seed(seed);
  for (const auto& [role, p] : requested) manifest.add_input(role, p);
  manifest.set("histogram_bins", in.histogram_bins);
  std::vector<std::filesystem::path> written;

  if (in.samples) {
    const auto samples = data::read_samples(*in.samples);
    auto one_mode = [&](const std::filesystem::path& model_path) {
      const auto model = gbt::QuantileEnsemble::load(model_path);
      const std::string tag = data::to_string(model.mode());
      const auto rows = sorted_prediction_intervals(model, samples, model.mode());
      if (rows.empty()) spdlog::warn("report: no {} samples in {}", tag, in.samples->string());
      const auto intervals = out_dir / ("prediction_intervals_" + tag + ".csv");
      write_prediction_intervals(intervals, model.quantiles(), rows);
      written.push_back(intervals);

      // Errors of the median, or of the central quantile when 0.5 is absent.
      const auto& qs = model.quantiles();
      std::size_t mid = 0;
      for (std::size_t i = 0; i < qs.size(); ++i) {
        if (std::abs(qs[i] - 0.5) < std::abs(qs[mid] - 0.5)) mid = i;
      }
      std::vector<double> errors;
      for (const auto& r : rows) errors.push_back(r.predicted[mid] - r.actual);
      const auto hist = out_dir / ("error_histogram_" + tag + ".csv");
      write_histogram(hist, histogram(errors, in.histogram_bins));
      written.push_back(hist);
    };
    if (in.model_cyclic) one_mode(*in.model_cyclic);
    if (in.model_calendar) one_mode(*in.model_calendar);
  }

  if (in.trace) {
    const auto doc = read_json(*in.trace);
    const std::string schema = doc.value("schema_version", "");
    std::optional<lifecycle::LifecycleTrace> worst;
    std::vector<lifecycle::LifecycleTrace> mc;
    double c0 = 0.0, gamma = 0.0;
    try {
      if (schema == "simulation-v1") {
        worst = lifecycle::LifecycleTrace::from_json(doc.at("worst_case"));
        for (const auto& p : doc.at("monte_carlo").at("paths")) mc.push_back(lifecycle::LifecycleTrace::from_json(p));
        c0 = doc.at("config").at("c0_kwh").get<double>();
        gamma = doc.at("config").at("gamma_days").get<double>();
      } else {
        throw DataError("unsupported schema '" + schema + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(in.trace->string() + ": " + e.what());
    }
    const auto curves = out_dir / "capacity_curves.csv";
    write_capacity_curves(curves, worst ? &*worst : nullptr, mc, c0, gamma);
    written.push_back(curves);
  }

  if (in.table1) {
    const auto rows = read_table1(*in.table1);
    const auto t1 = out_dir / "table1.csv";
    write_table1(t1, rows);
    written.push_back(t1);
  }

  for (const auto& p : written) manifest.add_output(p);
  const auto mpath = out_dir / "manifest.json";
  manifest.write(mpath);
  written.push_back(mpath);
  return written;
}

}  // namespace gridlife::reports
