#include "gridlife/degradation_dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gridlife/csv.h"
#include "gridlife/error.h"
#include "gridlife/random.h"

namespace gridlife::data {
namespace {

constexpr double kSecondsPerDay = 86400.0;
constexpr double kSecondsPerHour = 3600.0;
constexpr double kIdleCurrentA = 1e-9;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DataError(std::string(name) + " must be positive and finite, got " + csv::format_number(value));
  }
}

std::string condition_key(double temp_c) {
  std::ostringstream key;
  key << std::lround(temp_c * 2.0);
  return key.str();
}

}  // namespace

std::string to_string(AgingMode mode) {
  return mode == AgingMode::kCalendar ? "calendar" : "cyclic";
}

AgingMode parse_aging_mode(const std::string& text) {
  if (text == "calendar") return AgingMode::kCalendar;
  if (text == "cyclic") return AgingMode::kCyclic;
  throw DataError("unknown aging mode '" + text + "'");
}

double compute_capacity(double e_charge_kwh, double e_discharge_kwh) {
  require_positive(e_charge_kwh, "check-up charge energy");
  require_positive(e_discharge_kwh, "check-up discharge energy");
  return std::sqrt(e_charge_kwh * e_discharge_kwh);
}

double compute_dod(double e_charge_cyc_kwh, double e_discharge_cyc_kwh, double c0_kwh) {
  require_positive(c0_kwh, "reference capacity");
  require_positive(e_charge_cyc_kwh, "cycle charge energy");
  require_positive(e_discharge_cyc_kwh, "cycle discharge energy");
  const double ratio = std::sqrt(e_charge_cyc_kwh * e_discharge_cyc_kwh) / c0_kwh;
  if (ratio > 1.0) {
    spdlog::warn("data quality: DOD ratio {} exceeds 1, clamped", ratio);
    return 1.0;
  }
  return ratio;
}

double calendar_rate(double c_i, double c_next, double n_days, double n_cu, double cu_offset_kwh) {
  if (!(n_days > 0.0)) throw DataError("calendar interval must span a positive number of days");
  return (c_i - c_next - cu_offset_kwh * n_cu) / n_days;
}

double equivalent_full_cycles(double dod, double n_cycles) { return dod * n_cycles; }

double cyclic_rate(double c_i, double c_next, double dod, double n_cycles) {
  const double efc = equivalent_full_cycles(dod, n_cycles);
  if (!(efc > 0.0)) throw DataError("cyclic interval has zero equivalent full cycles");
  return (c_i - c_next) / efc;
}

double fit_checkup_offset(std::span<const CalendarInterval> intervals) {
  struct Moments {
    double dd = 0.0, dl = 0.0, dn = 0.0;
  };
  std::map<std::string, Moments> groups;
  for (const auto& iv : intervals) {
    if (!(iv.n_days > 0.0)) throw DataError("calendar interval with non-positive length");
    auto& m = groups[iv.condition];
    m.dd += iv.n_days * iv.n_days;
    m.dl += iv.n_days * iv.capacity_loss_kwh;
    m.dn += iv.n_days * iv.n_cu;
  }
  // With per-condition rates profiled out, the offset solves a 1-D least
  // squares problem in the residual directions.
  double ab = 0.0, bb = 0.0;
  for (const auto& iv : intervals) {
    const auto& m = groups.at(iv.condition);
    const double a = iv.capacity_loss_kwh - (m.dl / m.dd) * iv.n_days;
    const double b = iv.n_cu - (m.dn / m.dd) * iv.n_days;
    ab += a * b;
    bb += b * b;
  }
  if (bb < 1e-12) {
    throw DataError("check-up offset is unidentifiable: every condition uses a single interval length");
  }
  return ab / bb;
}

// ---------------------------------------------------------------------------
// Cell files

CellData read_cell(const std::filesystem::path& dir, const std::string& id) {
  CellData cell;
  cell.id = id;

  const auto cycles = csv::read(dir / (id + "_cycles.csv"));
  csv::require_header(cycles, {"t_s", "current_a", "voltage_v", "temp_c"});
  cell.records.reserve(cycles.rows.size());
  for (std::size_t r = 0; r < cycles.rows.size(); ++r) {
    CycleRecord rec{cycles.number(r, 0), cycles.number(r, 1), cycles.number(r, 2), cycles.number(r, 3)};
    if (!(rec.voltage_v > 0.0)) {
      throw DataError(cycles.source + ":" + std::to_string(r + 2) + ": voltage must be positive");
    }
    if (!cell.records.empty() && !(rec.t_s > cell.records.back().t_s)) {
      throw DataError(cycles.source + ":" + std::to_string(r + 2) + ": timestamps must be strictly increasing");
    }
    cell.records.push_back(rec);
  }

  const auto cu = csv::read(dir / (id + "_cu.csv"));
  csv::require_header(cu, {"cu_index", "e_charge_kwh", "e_discharge_kwh", "day_offset"});
  for (std::size_t r = 0; r < cu.rows.size(); ++r) {
    CheckUpMeasurement m{static_cast<int>(cu.number(r, 0)), cu.number(r, 1), cu.number(r, 2), cu.number(r, 3)};
    if (!(m.e_charge_kwh > 0.0) || !(m.e_discharge_kwh > 0.0)) {
      throw DataError(cu.source + ":" + std::to_string(r + 2) + ": check-up energies must be positive");
    }
    if (!cell.checkups.empty() && m.day_offset < cell.checkups.back().day_offset) {
      throw DataError(cu.source + ":" + std::to_string(r + 2) + ": day_offset must be non-decreasing");
    }
    cell.checkups.push_back(m);
  }
  return cell;
}

void write_cell(const std::filesystem::path& dir, const CellData& cell) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (cell.id + "_cycles.csv"));
    csv::Writer writer(out);
    writer.row(std::vector<std::string>{"t_s", "current_a", "voltage_v", "temp_c"});
    for (const auto& r : cell.records) writer.row(std::vector<double>{r.t_s, r.current_a, r.voltage_v, r.temp_c});
  }
  std::ofstream out(dir / (cell.id + "_cu.csv"));
  csv::Writer writer(out);
  writer.row(std::vector<std::string>{"cu_index", "e_charge_kwh", "e_discharge_kwh", "day_offset"});
  for (const auto& m : cell.checkups) {
    writer.row(std::vector<double>{static_cast<double>(m.cu_index), m.e_charge_kwh, m.e_discharge_kwh, m.day_offset});
  }
}

std::vector<std::string> list_cells(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::string> ids;
  const std::string suffix = "_cycles.csv";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      const std::string id = name.substr(0, name.size() - suffix.size());
      if (std::filesystem::exists(dir / (id + "_cu.csv"))) ids.push_back(id);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<IntervalMetrics> interval_metrics(const CellData& cell) {
  if (cell.records.empty()) throw DataError("cell " + cell.id + " has no cycle records");
  if (cell.checkups.size() < 2) throw DataError("cell " + cell.id + " needs at least two check-ups");

  const double t0 = cell.records.front().t_s;
  std::vector<IntervalMetrics> out;
  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < cell.checkups.size(); ++i) {
    const auto& cu_a = cell.checkups[i];
    const auto& cu_b = cell.checkups[i + 1];
    IntervalMetrics m;
    m.capacity_start_kwh = compute_capacity(cu_a.e_charge_kwh, cu_a.e_discharge_kwh);
    m.capacity_end_kwh = compute_capacity(cu_b.e_charge_kwh, cu_b.e_discharge_kwh);
    m.n_days = cu_b.day_offset - cu_a.day_offset;
    const double start = t0 + cu_a.day_offset * kSecondsPerDay;
    const double end = t0 + cu_b.day_offset * kSecondsPerDay;

    while (k < cell.records.size() && cell.records[k].t_s < start) ++k;
    const std::size_t first = k;
    while (k < cell.records.size() && cell.records[k].t_s < end) ++k;
    const std::size_t last = k;  // one past
    if (first == last) {
      throw DataError("cell " + cell.id + ": no records between check-ups " + std::to_string(cu_a.cu_index) +
                      " and " + std::to_string(cu_b.cu_index));
    }

    double temp_sum = 0.0;
    double e_chg = 0.0, e_dis = 0.0;
    bool in_discharge = false;
    for (std::size_t j = first; j < last; ++j) {
      const auto& rec = cell.records[j];
      temp_sum += rec.temp_c;
      const double power_kw = rec.voltage_v * rec.current_a / 1000.0;
      if (rec.current_a > kIdleCurrentA) {
        m.cyclic = true;
        m.p_chg_max_kw = std::max(m.p_chg_max_kw, power_kw);
        in_discharge = false;
      } else if (rec.current_a < -kIdleCurrentA) {
        m.cyclic = true;
        m.p_dis_max_kw = std::max(m.p_dis_max_kw, -power_kw);
        if (!in_discharge) ++m.n_cycles;
        in_discharge = true;
      } else {
        in_discharge = false;
      }
      // Sample-and-hold integration over the step to the next record.
      if (j + 1 < last) {
        const double dt_h = (cell.records[j + 1].t_s - rec.t_s) / kSecondsPerHour;
        if (power_kw > 0.0) e_chg += power_kw * dt_h;
        if (power_kw < 0.0) e_dis -= power_kw * dt_h;
      }
    }
    m.mean_temp_c = temp_sum / static_cast<double>(last - first);
    if (m.n_cycles > 0) {
      m.e_charge_per_cycle_kwh = e_chg / m.n_cycles;
      m.e_discharge_per_cycle_kwh = e_dis / m.n_cycles;
    }
    out.push_back(m);
  }
  return out;
}

std::vector<DegradationSample> process_cells(std::span<const CellData> cells) {
  struct Pending {
    IntervalMetrics metrics;
    double c0 = 0.0;
  };
  std::vector<Pending> pending;
  std::vector<CalendarInterval> calendar;
  for (const auto& cell : cells) {
    const double c0 = compute_capacity(cell.checkups.front().e_charge_kwh, cell.checkups.front().e_discharge_kwh);
    for (const auto& m : interval_metrics(cell)) {
      pending.push_back({m, c0});
      if (!m.cyclic) {
        calendar.push_back({condition_key(m.mean_temp_c), m.capacity_start_kwh - m.capacity_end_kwh, m.n_days, 1.0});
      }
    }
  }

  double cu_offset = 0.0;
  if (!calendar.empty()) {
    try {
      cu_offset = fit_checkup_offset(calendar);
      spdlog::info("fitted check-up offset {} kWh over {} calendar intervals", cu_offset, calendar.size());
    } catch (const DataError& e) {
      spdlog::warn("{}; using zero offset", e.what());
    }
  }

  std::vector<DegradationSample> samples;
  samples.reserve(pending.size());
  for (const auto& [m, c0] : pending) {
    DegradationSample s;
    s.capacity_kwh = m.capacity_start_kwh;
    s.temp_c = m.mean_temp_c;
    if (m.cyclic) {
      if (m.n_cycles == 0) throw DataError("cyclic interval without a discharge phase");
      s.mode = AgingMode::kCyclic;
      s.dod = compute_dod(m.e_charge_per_cycle_kwh, m.e_discharge_per_cycle_kwh, c0);
      s.p_chg_kw = m.p_chg_max_kw;
      s.p_dis_kw = m.p_dis_max_kw;
      s.efc = equivalent_full_cycles(s.dod, m.n_cycles);
      s.rate = cyclic_rate(m.capacity_start_kwh, m.capacity_end_kwh, s.dod, m.n_cycles);
    } else {
      s.mode = AgingMode::kCalendar;
      s.days = m.n_days;
      s.rate = calendar_rate(m.capacity_start_kwh, m.capacity_end_kwh, m.n_days, 1.0, cu_offset);
    }
    samples.push_back(s);
  }
  return samples;
}

std::vector<DegradationSample> process_directory(const std::filesystem::path& dir) {
  std::vector<CellData> cells;
  for (const auto& id : list_cells(dir)) cells.push_back(read_cell(dir, id));
  if (cells.empty()) throw DataError("no cell files found in " + dir.string());
  return process_cells(cells);
}

// ---------------------------------------------------------------------------
// Synthetic fleet

double DegradationSurface::temperature_factor(double temp_c) const {
  const double z = (temp_c - t_opt_c) / temp_scale_c;
  return 1.0 + (z < 0.0 ? cold_coef : hot_coef) * z * z;
}

double DegradationSurface::median_cyclic(double capacity_kwh, double temp_c, double dod, double p_chg_kw,
                                         double p_dis_kw) const {
  const double power = (p_chg_kw + p_dis_kw) / power_ref_kw;
  return cyc_base_kwh_per_efc * temperature_factor(temp_c) * (dod_floor + dod_coef * dod * dod) *
         (1.0 + power_coef * power * power) * (1.0 + capacity_accel * (1.0 - capacity_kwh / c0_kwh));
}

double DegradationSurface::median_calendar(double capacity_kwh, double temp_c) const {
  return cal_base_kwh_per_day * temperature_factor(temp_c) * (1.0 + capacity_accel * (1.0 - capacity_kwh / c0_kwh));
}

double DegradationSurface::sigma_cyclic(double temp_c, double dod) const {
  return noise_scale * sigma0 * (1.0 + sigma_temp * std::abs(temp_c - t_opt_c) / temp_scale_c + sigma_dod * dod);
}

double DegradationSurface::sigma_calendar(double temp_c) const {
  return noise_scale * sigma0 * (1.0 + sigma_temp * std::abs(temp_c - t_opt_c) / temp_scale_c);
}

double DegradationSurface::quantile(const DegradationSample& at, double q) const {
  const double z = boost::math::quantile(boost::math::normal(), q);
  if (at.mode == AgingMode::kCalendar) {
    return median_calendar(at.capacity_kwh, at.temp_c) * std::exp(sigma_calendar(at.temp_c) * z);
  }
  return median_cyclic(at.capacity_kwh, at.temp_c, at.dod, at.p_chg_kw, at.p_dis_kw) *
         std::exp(sigma_cyclic(at.temp_c, at.dod) * z);
}

void SyntheticConfig::validate() const {
  auto check = [](const Range& r, const char* name, double floor) {
    if (!(r.lo < r.hi) || r.lo < floor) {
      throw ConfigError(std::string("synthetic range '") + name + "' is degenerate or out of domain");
    }
  };
  if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
  if (calendar_fraction < 0.0 || calendar_fraction > 1.0) throw ConfigError("calendar_fraction must lie in [0,1]");
  check(capacity_frac, "capacity_frac", 1e-9);
  check(temp_c, "temp_c", -273.15);
  check(dod, "dod", 1e-9);
  if (dod.hi > 1.0) throw ConfigError("synthetic range 'dod' must stay within (0,1]");
  check(p_chg_kw, "p_chg_kw", 0.0);
  check(p_dis_kw, "p_dis_kw", 0.0);
  check(n_cycles, "n_cycles", 1.0);
  check(n_days, "n_days", 1.0);
  if (!(surface.c0_kwh > 0.0) || surface.noise_scale < 0.0 || surface.sigma0 < 0.0) {
    throw ConfigError("degradation surface needs c0_kwh > 0 and non-negative noise");
  }
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  SyntheticConfig config;
  auto number = [&](const nlohmann::json& obj, const char* key, double& field) {
    if (obj.contains(key)) field = obj.at(key).get<double>();
  };
  auto range = [&](const char* key, Range& field) {
    if (!doc.contains(key)) return;
    const auto& v = doc.at(key);
    if (!v.is_array() || v.size() != 2) throw ConfigError(path.string() + ": '" + key + "' must be [lo, hi]");
    field = {v[0].get<double>(), v[1].get<double>()};
  };
  try {
    if (doc.contains("n_samples")) config.n_samples = doc.at("n_samples").get<int>();
    number(doc, "calendar_fraction", config.calendar_fraction);
    range("capacity_frac", config.capacity_frac);
    range("temp_c", config.temp_c);
    range("dod", config.dod);
    range("p_chg_kw", config.p_chg_kw);
    range("p_dis_kw", config.p_dis_kw);
    range("n_cycles", config.n_cycles);
    range("n_days", config.n_days);
    if (doc.contains("surface")) {
      const auto& s = doc.at("surface");
      auto& f = config.surface;
      number(s, "c0_kwh", f.c0_kwh);
      number(s, "cyc_base_kwh_per_efc", f.cyc_base_kwh_per_efc);
      number(s, "cal_base_kwh_per_day", f.cal_base_kwh_per_day);
      number(s, "t_opt_c", f.t_opt_c);
      number(s, "temp_scale_c", f.temp_scale_c);
      number(s, "cold_coef", f.cold_coef);
      number(s, "hot_coef", f.hot_coef);
      number(s, "dod_floor", f.dod_floor);
      number(s, "dod_coef", f.dod_coef);
      number(s, "power_ref_kw", f.power_ref_kw);
      number(s, "power_coef", f.power_coef);
      number(s, "capacity_accel", f.capacity_accel);
      number(s, "sigma0", f.sigma0);
      number(s, "sigma_temp", f.sigma_temp);
      number(s, "sigma_dod", f.sigma_dod);
      number(s, "noise_scale", f.noise_scale);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  config.validate();
  return config;
}

std::vector<DegradationSample> generate_synthetic_fleet(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const auto& f = config.surface;
  std::vector<DegradationSample> samples;
  samples.reserve(static_cast<std::size_t>(config.n_samples));
  for (int i = 0; i < config.n_samples; ++i) {
    DegradationSample s;
    const bool calendar = uniform01(rng) < config.calendar_fraction;
    s.capacity_kwh = f.c0_kwh * uniform(rng, config.capacity_frac.lo, config.capacity_frac.hi);
    s.temp_c = uniform(rng, config.temp_c.lo, config.temp_c.hi);
    double median = 0.0, sigma = 0.0;
    if (calendar) {
      s.mode = AgingMode::kCalendar;
      s.days = std::round(uniform(rng, config.n_days.lo, config.n_days.hi));
      median = f.median_calendar(s.capacity_kwh, s.temp_c);
      sigma = f.sigma_calendar(s.temp_c);
    } else {
      s.mode = AgingMode::kCyclic;
      s.dod = uniform(rng, config.dod.lo, config.dod.hi);
      s.p_chg_kw = uniform(rng, config.p_chg_kw.lo, config.p_chg_kw.hi);
      s.p_dis_kw = uniform(rng, config.p_dis_kw.lo, config.p_dis_kw.hi);
      s.efc = equivalent_full_cycles(s.dod, std::round(uniform(rng, config.n_cycles.lo, config.n_cycles.hi)));
      median = f.median_cyclic(s.capacity_kwh, s.temp_c, s.dod, s.p_chg_kw, s.p_dis_kw);
      sigma = f.sigma_cyclic(s.temp_c, s.dod);
    }
    const double z = standard_normal(rng);
    s.rate = sigma > 0.0 ? median * std::exp(sigma * z) : median;
    samples.push_back(s);
  }
  return samples;
}

std::vector<CellData> generate_synthetic_cells(const SyntheticCellConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const auto& f = config.surface;
  const double t0 = 1.6e9;
  const double rest_step_s = 6.0 * kSecondsPerHour;
  auto noise = [&] { return config.measurement_noise_kwh * standard_normal(rng); };
  // Check-up energies whose geometric mean is exactly `capacity`.
  auto checkup = [](int index, double capacity, double day) {
    return CheckUpMeasurement{index, capacity * 1.02, capacity / 1.02, day};
  };

  std::vector<CellData> cells;
  for (std::size_t ti = 0; ti < config.calendar_temps_c.size(); ++ti) {
    for (std::size_t ci = 0; ci < config.cu_cadences_days.size(); ++ci) {
      const double temp = config.calendar_temps_c[ti];
      const double cadence = config.cu_cadences_days[ci];
      CellData cell;
      cell.id = "cal_T" + std::to_string(static_cast<int>(temp)) + "_d" + std::to_string(static_cast<int>(cadence));
      double capacity = config.c0_kwh;
      cell.checkups.push_back(checkup(0, capacity, 0.0));
      for (int k = 1; k <= config.calendar_intervals; ++k) {
        capacity -= f.median_calendar(capacity, temp) * cadence + config.cu_offset_kwh + noise();
        cell.checkups.push_back(checkup(k, capacity, cadence * k));
      }
      const double horizon = cadence * config.calendar_intervals * kSecondsPerDay;
      for (double t = 0.0; t <= horizon; t += rest_step_s) cell.records.push_back({t0 + t, 0.0, 3.6, temp});
      cells.push_back(std::move(cell));
    }
  }

  const double step_s = 900.0;
  const int phase_steps = 8;  // 2 h charge, 2 h discharge
  const double interval_days = 10.0;
  for (int c = 0; c < config.cyclic_cells; ++c) {
    CellData cell;
    cell.id = "cyc_" + std::string(1, static_cast<char>('A' + c));
    const double temp = uniform(rng, 15.0, 45.0);
    double capacity = config.c0_kwh;
    cell.checkups.push_back(checkup(0, capacity, 0.0));
    double t = 0.0;
    for (int k = 0; k < config.cyclic_intervals; ++k) {
      const double dod = uniform(rng, 0.2, 0.9);
      const double e_charge = dod * config.c0_kwh / 0.98;
      const double e_discharge = dod * config.c0_kwh * 0.98;
      const double p_chg = e_charge / (phase_steps * step_s / kSecondsPerHour);
      const double p_dis = e_discharge / (phase_steps * step_s / kSecondsPerHour);
      const double v_chg = 820.0, v_dis = 760.0;
      const double start = k * interval_days * kSecondsPerDay;
      t = start;
      for (int n = 0; n < config.cycles_per_interval; ++n) {
        for (int s = 0; s < phase_steps; ++s, t += step_s) cell.records.push_back({t0 + t, p_chg * 1000.0 / v_chg, v_chg, temp});
        for (int s = 0; s < phase_steps; ++s, t += step_s) cell.records.push_back({t0 + t, -p_dis * 1000.0 / v_dis, v_dis, temp});
      }
      const double end = (k + 1) * interval_days * kSecondsPerDay;
      for (; t < end; t += rest_step_s) cell.records.push_back({t0 + t, 0.0, 790.0, temp});
      const double realized_dod = std::sqrt(e_charge * e_discharge) / config.c0_kwh;
      const double efc = realized_dod * config.cycles_per_interval;
      capacity -= f.median_cyclic(capacity, temp, realized_dod, p_chg, p_dis) * efc + noise();
      cell.checkups.push_back(checkup(k + 1, capacity, (k + 1) * interval_days));
    }
    cell.records.push_back({t0 + t, 0.0, 790.0, temp});
    cells.push_back(std::move(cell));
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Splitting

SplitSizes split_sizes(std::size_t n, const SplitFractions& fractions) {
  const double total = fractions.train + fractions.validation + fractions.test;
  if (fractions.train < 0.0 || fractions.validation < 0.0 || fractions.test < 0.0 || std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  SplitSizes sizes;
  sizes.test = static_cast<std::size_t>(std::ceil(fractions.test * static_cast<double>(n) - 1e-9));
  const std::size_t rest = n - sizes.test;
  const double share = fractions.train + fractions.validation;
  sizes.validation = share > 0.0
                         ? static_cast<std::size_t>(std::ceil(fractions.validation / share * static_cast<double>(rest) - 1e-9))
                         : 0;
  sizes.train = rest - sizes.validation;
  return sizes;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

DatasetSplit split_dataset(std::span<const DegradationSample> samples, const SplitFractions& fractions,
                           std::uint64_t seed) {
  if (samples.empty()) throw DataError("cannot split an empty dataset");
  const SplitSizes sizes = split_sizes(samples.size(), fractions);
  const auto perm = seeded_permutation(samples.size(), seed);
  DatasetSplit split;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto& s = samples[perm[i]];
    if (i < sizes.train) {
      split.train.push_back(s);
    } else if (i < sizes.train + sizes.validation) {
      split.validation.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// samples.csv

void write_samples(std::ostream& out, std::span<const DegradationSample> samples) {
  csv::Writer writer(out);
  writer.row(samples_header());
  for (const auto& s : samples) {
    writer.row(std::vector<std::string>{csv::format_number(s.capacity_kwh), csv::format_number(s.temp_c),
                                        csv::format_number(s.dod), csv::format_number(s.p_chg_kw),
                                        csv::format_number(s.p_dis_kw), to_string(s.mode), csv::format_number(s.rate),
                                        csv::format_number(s.efc), csv::format_number(s.days)});
  }
}

void write_samples(const std::filesystem::path& path, std::span<const DegradationSample> samples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_samples(out, samples);
}

std::vector<DegradationSample> read_samples(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::require_header(table, samples_header());
  std::vector<DegradationSample> samples;
  samples.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    DegradationSample s;
    s.capacity_kwh = table.number(r, 0);
    s.temp_c = table.number(r, 1);
    s.dod = table.number(r, 2);
    s.p_chg_kw = table.number(r, 3);
    s.p_dis_kw = table.number(r, 4);
    s.mode = parse_aging_mode(table.rows[r][5]);
    s.rate = table.number(r, 6);
    s.efc = table.number(r, 7);
    s.days = table.number(r, 8);
    if (!(s.capacity_kwh > 0.0)) {
      throw DataError(path.string() + ":" + std::to_string(r + 2) + ": capacity_kwh must be positive");
    }
    if (s.mode == AgingMode::kCyclic && !(s.dod > 0.0 && s.dod <= 1.0)) {
      throw DataError(path.string() + ":" + std::to_string(r + 2) + ": cyclic dod must lie in (0,1]");
    }
    samples.push_back(s);
  }
  return samples;
}

}  // namespace gridlife::data
