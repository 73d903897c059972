#ifndef GRIDLIFE_DEGRADATION_DATASET_H
#define GRIDLIFE_DEGRADATION_DATASET_H

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gridlife::data {

enum class AgingMode { kCalendar, kCyclic };

std::string to_string(AgingMode mode);
AgingMode parse_aging_mode(const std::string& text);

struct CycleRecord {
  double t_s = 0.0;
  double current_a = 0.0;  // + = charge
  double voltage_v = 0.0;
  double temp_c = 0.0;
};

struct CheckUpMeasurement {
  int cu_index = 0;
  double e_charge_kwh = 0.0;
  double e_discharge_kwh = 0.0;
  double day_offset = 0.0;
};

// One aging interval between consecutive check-ups.
//
// Calendar samples leave dod, p_chg_kw, p_dis_kw and efc at zero; cyclic
// samples leave days at zero. `rate` is kWh/day (calendar) or kWh/EFC
// (cyclic).
struct DegradationSample {
  double capacity_kwh = 0.0;
  double temp_c = 0.0;
  double dod = 0.0;
  double p_chg_kw = 0.0;
  double p_dis_kw = 0.0;
  AgingMode mode = AgingMode::kCyclic;
  double rate = 0.0;
  double efc = 0.0;
  double days = 0.0;

  bool operator==(const DegradationSample&) const = default;
};

/// Geometric mean of the check-up charge/discharge energies.
double compute_capacity(double e_charge_kwh, double e_discharge_kwh);

/// Per-cycle geometric-mean energy over the reference capacity. Ratios above
/// one are clamped to one and logged as a data-quality warning.
double compute_dod(double e_charge_cyc_kwh, double e_discharge_cyc_kwh, double c0_kwh);

/// Average daily loss after removing `n_cu` check-up offsets of `cu_offset_kwh` each.
double calendar_rate(double c_i, double c_next, double n_days, double n_cu,
                     double cu_offset_kwh = 0.0);

double equivalent_full_cycles(double dod, double n_cycles);

/// Capacity loss per equivalent full cycle.
double cyclic_rate(double c_i, double c_next, double dod, double n_cycles);

// Loss observed over one calendar interval, tagged with the storage
// condition it was aged under.
struct CalendarInterval {
  std::string condition;
  double capacity_loss_kwh = 0.0;
  double n_days = 0.0;
  double n_cu = 1.0;
};

/// Least-squares fit of loss = rate[condition] * days + offset * n_cu with one
/// shared per-check-up offset. Needs at least two distinct interval lengths in
/// some condition; otherwise the offset is unidentifiable and DataError is thrown.
double fit_checkup_offset(std::span<const CalendarInterval> intervals);

// ---------------------------------------------------------------------------
// Cell files

struct CellData {
  std::string id;
  std::vector<CycleRecord> records;
  std::vector<CheckUpMeasurement> checkups;
};

CellData read_cell(const std::filesystem::path& dir, const std::string& id);
void write_cell(const std::filesystem::path& dir, const CellData& cell);

/// Lists cell ids that have both `<id>_cycles.csv` and `<id>_cu.csv`, sorted.
std::vector<std::string> list_cells(const std::filesystem::path& dir);

// Stress metrics of one interval computed from raw records.
struct IntervalMetrics {
  double capacity_start_kwh = 0.0;
  double capacity_end_kwh = 0.0;
  double mean_temp_c = 0.0;
  double n_days = 0.0;
  int n_cycles = 0;
  double e_charge_per_cycle_kwh = 0.0;
  double e_discharge_per_cycle_kwh = 0.0;
  double p_chg_max_kw = 0.0;
  double p_dis_max_kw = 0.0;
  bool cyclic = false;
};

/// Splits a cell's records at its check-up days and integrates each interval.
std::vector<IntervalMetrics> interval_metrics(const CellData& cell);

/// Full pipeline: metrics for every cell, shared check-up offset fitted over
/// all calendar intervals, then labelled samples.
std::vector<DegradationSample> process_cells(std::span<const CellData> cells);
std::vector<DegradationSample> process_directory(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic fleet

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Ground-truth degradation surface. The median rate is bathtub-shaped in
// temperature, increasing in DOD and power, and accelerates as capacity
// fades. Noise is multiplicative log-normal with a spread that grows away
// from the optimal temperature and with DOD.
struct DegradationSurface {
  double c0_kwh = 910.8;
  double cyc_base_kwh_per_efc = 0.12;
  double cal_base_kwh_per_day = 0.03;
  double t_opt_c = 30.0;
  double temp_scale_c = 25.0;
  double cold_coef = 0.5;
  double hot_coef = 1.2;
  double dod_floor = 0.4;
  double dod_coef = 1.6;
  double power_ref_kw = 2000.0;
  double power_coef = 0.5;
  double capacity_accel = 1.0;
  double sigma0 = 0.25;
  double sigma_temp = 0.3;
  double sigma_dod = 0.2;
  double noise_scale = 1.0;

  double temperature_factor(double temp_c) const;
  double median_cyclic(double capacity_kwh, double temp_c, double dod, double p_chg_kw,
                       double p_dis_kw) const;
  double median_calendar(double capacity_kwh, double temp_c) const;
  double sigma_cyclic(double temp_c, double dod) const;
  double sigma_calendar(double temp_c) const;
  /// q-quantile of the label distribution at a sample's feature point.
  double quantile(const DegradationSample& at, double q) const;
};

struct SyntheticConfig {
  int n_samples = 2537;
  double calendar_fraction = 0.2;
  Range capacity_frac{0.4, 1.0};
  Range temp_c{0.0, 55.0};
  Range dod{0.05, 1.0};
  Range p_chg_kw{50.0, 2000.0};
  Range p_dis_kw{50.0, 2500.0};
  Range n_cycles{20.0, 200.0};
  Range n_days{30.0, 120.0};
  DegradationSurface surface;

  /// Throws ConfigError on degenerate ranges or out-of-domain values.
  void validate() const;
};

SyntheticConfig load_synthetic_config(const std::filesystem::path& path);

/// Deterministic for fixed (config, seed).
std::vector<DegradationSample> generate_synthetic_fleet(const SyntheticConfig& config,
                                                        std::uint64_t seed);

// Raw cell files with a planted check-up offset: calendar cells at several
// temperatures with two check-up cadences, plus cyclic cells.
struct SyntheticCellConfig {
  double c0_kwh = 910.8;
  double cu_offset_kwh = 0.05;
  std::vector<double> calendar_temps_c{10.0, 25.0, 40.0};
  std::vector<double> cu_cadences_days{20.0, 60.0};
  int calendar_intervals = 6;
  int cyclic_cells = 2;
  int cyclic_intervals = 3;
  int cycles_per_interval = 4;
  double measurement_noise_kwh = 0.0;
  DegradationSurface surface;
};

std::vector<CellData> generate_synthetic_cells(const SyntheticCellConfig& config,
                                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

struct DatasetSplit {
  std::vector<DegradationSample> train;
  std::vector<DegradationSample> validation;
  std::vector<DegradationSample> test;
};

/// Test set takes ceil(test * n); validation takes ceil of its share of the
/// remainder; training gets the rest.
SplitSizes split_sizes(std::size_t n, const SplitFractions& fractions);

/// Fisher-Yates permutation of 0..n-1 driven by `seed`.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

DatasetSplit split_dataset(std::span<const DegradationSample> samples,
                           const SplitFractions& fractions, std::uint64_t seed);

// ---------------------------------------------------------------------------
// samples.csv

inline const std::vector<std::string>& samples_header() {
  static const std::vector<std::string> header{"capacity_kwh", "temp_c", "dod",  "p_chg_kw", "p_dis_kw",
                                               "mode",         "rate",   "efc",  "days"};
  return header;
}

void write_samples(std::ostream& out, std::span<const DegradationSample> samples);
void write_samples(const std::filesystem::path& path, std::span<const DegradationSample> samples);
std::vector<DegradationSample> read_samples(const std::filesystem::path& path);

}  // namespace gridlife::data

#endif  // GRIDLIFE_DEGRADATION_DATASET_H
