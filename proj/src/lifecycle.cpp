#include "gridlife/lifecycle.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "gridlife/error.h"
#include "gridlife/random.h"

namespace gridlife::lifecycle {
namespace {

// Keeps forecast-noise streams apart from rate-sampling streams.
constexpr std::uint64_t kNoiseSalt = 0x9e3779b97f4a7c15ULL;

template <typename T>
void read_if(const nlohmann::json& doc, const char* key, T& target) {
  if (doc.contains(key)) target = doc.at(key).get<T>();
}

}  // namespace

double seasonal_interest(double annual_rate) { return std::pow(1.0 + annual_rate, 0.25) - 1.0; }

void LifecycleConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  check(c0_kwh > 0.0, "c0_kwh must be positive");
  check(c_min_frac > 0.0 && c_min_frac <= 1.0, "c_min_frac must lie in (0,1]");
  check(n0_periods >= 1, "n0_periods must be at least 1");
  check(interest_per_period > 0.0, "interest_per_period must be positive");
  check(invest_usd >= 0.0, "invest_usd must be non-negative");
  check(gamma_days > 0.0, "gamma_days must be positive");
  check(day_scale > 0.0, "day_scale must be positive");
  check(quantile > 0.0 && quantile < 1.0, "quantile must lie in (0,1)");
  check(forecast_sigma >= 0.0, "forecast_sigma must be non-negative");
  check(tau_h > 0.0, "tau_h must be positive");
  check(scenario_files.empty() || scenario_files.size() == 4, "scenario_files must name four season days");
  if (!problems.empty()) {
    std::string text = "lifecycle config:";
    for (const auto& p : problems) text += "\n  " + p;
    throw ConfigError(text);
  }
}

LifecycleConfig LifecycleConfig::from_json(const nlohmann::json& doc) {
  LifecycleConfig c;
  try {
    read_if(doc, "c0_kwh", c.c0_kwh);
    read_if(doc, "c_min_frac", c.c_min_frac);
    read_if(doc, "n0_periods", c.n0_periods);
    read_if(doc, "interest_per_period", c.interest_per_period);
    read_if(doc, "invest_usd", c.invest_usd);
    read_if(doc, "gamma_days", c.gamma_days);
    c.day_scale = c.gamma_days;
    read_if(doc, "day_scale", c.day_scale);
    read_if(doc, "quantile", c.quantile);
    read_if(doc, "ambient_c_per_season", c.ambient_c_per_season);
    read_if(doc, "forecast_sigma", c.forecast_sigma);
    read_if(doc, "tau_h", c.tau_h);
    read_if(doc, "scenario_files", c.scenario_files);
    nlohmann::json battery = doc.contains("battery") ? doc.at("battery") : nlohmann::json::object();
    if (!battery.contains("c0_kwh")) battery["c0_kwh"] = c.c0_kwh;
    c.battery = dispatch::BatteryConfig::from_json(battery);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("lifecycle config: ") + e.what());
  }
  if (std::abs(c.battery.c0_kwh - c.c0_kwh) > 1e-9) {
    throw ConfigError("lifecycle config: battery.c0_kwh differs from c0_kwh");
  }
  c.validate();
  return c;
}

LifecycleConfig LifecycleConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json LifecycleConfig::to_json() const {
  return {{"schema_version", "lifecycle-v1"},
          {"c0_kwh", c0_kwh},
          {"c_min_frac", c_min_frac},
          {"n0_periods", n0_periods},
          {"interest_per_period", interest_per_period},
          {"invest_usd", invest_usd},
          {"gamma_days", gamma_days},
          {"day_scale", day_scale},
          {"quantile", quantile},
          {"ambient_c_per_season", ambient_c_per_season},
          {"forecast_sigma", forecast_sigma},
          {"tau_h", tau_h},
          {"battery", battery.to_json()},
          {"scenario_files", scenario_files}};
}

std::vector<dispatch::DayScenario> synthetic_seasons(double tau_h, std::size_t steps) {
  const std::array<double, 4> pv_peak{220.0, 420.0, 520.0, 340.0};
  const std::array<double, 4> load_level{190.0, 150.0, 170.0, 155.0};
  std::vector<dispatch::DayScenario> days;
  for (std::size_t s = 0; s < 4; ++s) {
    dispatch::DayScenario d;
    d.tau_h = tau_h;
    for (std::size_t t = 0; t < steps; ++t) {
      const double hour = (static_cast<double>(t) + 0.5) * tau_h;
      const double sun = (hour > 6.0 && hour < 19.0) ? std::sin(M_PI * (hour - 6.0) / 13.0) : 0.0;
      const double evening = std::exp(-0.5 * std::pow((hour - 19.5) / 2.0, 2));
      const double morning = 0.5 * std::exp(-0.5 * std::pow((hour - 8.0) / 1.5, 2));
      d.pv_kw.push_back(pv_peak[s] * sun);
      d.load_kw.push_back(load_level[s] * (0.7 + 0.6 * evening + 0.3 * morning));
      double buy = 0.12;
      if (hour >= 7.0 && hour < 17.0) buy = 0.25;
      if (hour >= 17.0 && hour < 21.0) buy = 0.50;
      if (hour >= 21.0 && hour < 23.0) buy = 0.25;
      d.tariff.buy.push_back(buy);
      d.tariff.sell.push_back(0.05);
    }
    days.push_back(std::move(d));
  }
  return days;
}

Setup Setup::from_config(const LifecycleConfig& config, const std::filesystem::path& base_dir) {
  config.validate();
  Setup setup;
  setup.config = config;
  if (config.scenario_files.empty()) {
    setup.seasons = synthetic_seasons(config.tau_h);
  } else {
    for (const auto& file : config.scenario_files) {
      std::filesystem::path path(file);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      setup.seasons.push_back(dispatch::DayScenario::load_csv(path, config.tau_h));
    }
  }
  setup.validate();
  return setup;
}

const dispatch::DayScenario& Setup::season(int period) const {
  return seasons[static_cast<std::size_t>(period - 1) % seasons.size()];
}

double Setup::ambient(int period) const {
  return config.ambient_c_per_season[static_cast<std::size_t>(period - 1) % 4];
}

dispatch::BatteryState Setup::battery_at(double capacity_kwh) const {
  auto b = config.battery;
  b.c0_kwh = config.c0_kwh;
  return b.state_at(capacity_kwh);
}

void Setup::validate() const {
  config.validate();
  if (seasons.size() != 4) throw ConfigError("a lifecycle setup needs four season days");
  for (const auto& s : seasons) s.validate();
}

ConstantRateModel::ConstantRateModel(std::vector<double> quantiles, std::vector<double> rates)
    : quantiles_(std::move(quantiles)), rates_(std::move(rates)) {
  if (quantiles_.size() != rates_.size() || quantiles_.empty()) {
    throw ConfigError("constant rate model needs one rate per quantile");
  }
  if (!std::is_sorted(rates_.begin(), rates_.end())) throw ConfigError("constant rates must be ascending");
}

ConstantRateModel::ConstantRateModel(std::vector<double> quantiles, double rate)
    : ConstantRateModel(quantiles, std::vector<double>(quantiles.size(), rate)) {}

std::vector<double> ConstantRateModel::predict_quantiles(std::span<const double>) const { return rates_; }

double period_efc(const dispatch::DayAggregates& aggregates, double c0_kwh, double day_scale) {
  return aggregates.throughput_kwh * day_scale / (2.0 * c0_kwh);
}

namespace {

double non_negative(double rate, const char* what) {
  if (rate < 0.0) {
    spdlog::warn("negative predicted {} rate {} clamped to 0", what, rate);
    return 0.0;
  }
  return rate;
}

double rate_at(const gbt::RateModel* model, std::span<const double> x, double q) {
  if (!model) throw ConfigError("degradation model missing");
  return model->predict_quantiles(model->clamp_features(x))[model->quantile_index(q)];
}

double rate_sampled(const gbt::RateModel* model, std::span<const double> x, double u) {
  if (!model) throw ConfigError("degradation model missing");
  const auto rates = model->predict_quantiles(model->clamp_features(x));
  return gbt::sample_rate(model->quantiles(), rates, u);
}

std::vector<double> calendar_features(double capacity, double ambient) { return {capacity, ambient}; }

}  // namespace

PeriodRates rates_at_quantile(const Models& models, std::span<const double> cyclic_features,
                              std::span<const double> calendar_features, double q) {
  return {non_negative(rate_at(models.cyclic, cyclic_features, q), "cyclic"),
          non_negative(rate_at(models.calendar, calendar_features, q), "calendar")};
}

PeriodRates sampled_rates(const Models& models, std::span<const double> cyclic_features,
                          std::span<const double> calendar_features, double u) {
  return {non_negative(rate_sampled(models.cyclic, cyclic_features, u), "cyclic"),
          non_negative(rate_sampled(models.calendar, calendar_features, u), "calendar")};
}

double capacity_transition(double capacity, double efc, const PeriodRates& rates, double gamma_days) {
  return capacity - rates.cyclic * efc - rates.calendar * gamma_days;
}

double worst_case_capacity(const dispatch::DayAggregates& aggregates, double capacity, double ambient_c,
                           const Setup& setup, const Models& models, double q) {
  if (capacity <= 0.0) throw ConfigError("capacity must be positive");
  const auto battery = setup.battery_at(capacity);
  const auto x_cyc = dispatch::aggregates_to_features(aggregates, battery, ambient_c);
  const auto x_cal = calendar_features(capacity, ambient_c);
  const double efc = period_efc(aggregates, setup.config.c0_kwh, setup.config.day_scale);
  return capacity_transition(capacity, efc, rates_at_quantile(models, x_cyc, x_cal, q), setup.config.gamma_days);
}

double chain_coefficient(int n_life, int n0, double interest) {
  if (n_life < 1) throw ConfigError("battery life must be at least one period");
  if (interest <= 0.0) throw ConfigError("interest must be positive");
  return (1.0 - std::pow(1.0 + interest, -n0)) / (1.0 - std::pow(1.0 + interest, -n_life));
}

double replacement_chain_cost(std::span<const double> period_costs, int n_life, int n0, double interest,
                              double invest) {
  if (n_life < 1) throw ConfigError("battery life must be at least one period");
  if (static_cast<std::size_t>(n_life) > period_costs.size()) {
    throw ConfigError("fewer period costs than battery life periods");
  }
  double discounted = invest;
  for (int n = 1; n <= n_life; ++n) discounted += period_costs[n - 1] / std::pow(1.0 + interest, n);
  return chain_coefficient(n_life, n0, interest) * discounted;
}

std::string to_string(Termination t) { return t == Termination::kEndOfLife ? "end_of_life" : "project_horizon"; }

Termination parse_termination(const std::string& text) {
  if (text == "end_of_life") return Termination::kEndOfLife;
  if (text == "project_horizon") return Termination::kProjectHorizon;
  throw DataError("unknown termination '" + text + "'");
}

LifecycleTrace LifecycleTrace::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema_version").get<std::string>() != "trace-v1") throw DataError("unsupported trace schema");
    LifecycleTrace t;
    t.life_periods = doc.at("life_periods").get<int>();
    t.total_cost = doc.at("total_cost_usd").get<double>();
    t.termination = parse_termination(doc.at("termination").get<std::string>());
    for (const auto& p : doc.at("periods")) {
      PeriodRecord r;
      r.period = p.at("period").get<int>();
      r.season = p.at("season").get<int>();
      r.capacity_in = p.at("capacity_in_kwh").get<double>();
      r.aggregates.throughput_kwh = p.at("throughput_kwh").get<double>();
      r.aggregates.e_max = p.at("band_kwh").get<double>();
      r.aggregates.p_chg_peak = p.at("peak_charge_kw").get<double>();
      r.aggregates.p_dis_peak = p.at("peak_discharge_kw").get<double>();
      r.efc = p.at("efc").get<double>();
      r.dod = p.at("dod").get<double>();
      r.rates.cyclic = p.at("rate_cyclic_kwh_per_efc").get<double>();
      r.rates.calendar = p.at("rate_calendar_kwh_per_day").get<double>();
      r.capacity_out = p.at("capacity_out_kwh").get<double>();
      r.capacity_worst = p.at("capacity_worst_kwh").get<double>();
      r.op_cost = p.at("op_cost_usd").get<double>();
      r.discounted_cost = p.at("discounted_cost_usd").get<double>();
      r.aggregates.operational_cost = r.op_cost;
      t.records.push_back(r);
    }
    if (static_cast<std::size_t>(t.life_periods) != t.records.size()) {
      throw DataError("trace life does not match its period count");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trace: ") + e.what());
  }
}

nlohmann::json LifecycleTrace::to_json() const {
  nlohmann::json periods = nlohmann::json::array();
  for (const auto& r : records) {
    periods.push_back({{"period", r.period},
                       {"season", r.season},
                       {"capacity_in_kwh", r.capacity_in},
                       {"throughput_kwh", r.aggregates.throughput_kwh},
                       {"band_kwh", r.aggregates.band()},
                       {"peak_charge_kw", r.aggregates.p_chg_peak},
                       {"peak_discharge_kw", r.aggregates.p_dis_peak},
                       {"efc", r.efc},
                       {"dod", r.dod},
                       {"rate_cyclic_kwh_per_efc", r.rates.cyclic},
                       {"rate_calendar_kwh_per_day", r.rates.calendar},
                       {"capacity_out_kwh", r.capacity_out},
                       {"capacity_worst_kwh", r.capacity_worst},
                       {"op_cost_usd", r.op_cost},
                       {"discounted_cost_usd", r.discounted_cost}});
  }
  return {{"schema_version", "trace-v1"},
          {"life_periods", life_periods},
          {"total_cost_usd", total_cost},
          {"termination", to_string(termination)},
          {"periods", periods}};
}

namespace {

dispatch::DayResult dispatch_period(const Policy& policy, const Setup& setup, int period, double capacity,
                                    std::uint64_t seed) {
  const auto& day = setup.season(period);
  const auto battery = setup.battery_at(capacity);
  const double grid_cap = setup.config.battery.grid_cap_kw;
  try {
    if (policy.idle) return dispatch::idle_day(day, battery);
    if (setup.config.forecast_sigma == 0.0) return dispatch::single_shot(day, policy.theta, battery, grid_cap);
    dispatch::NoisyForecaster forecaster(day, setup.config.forecast_sigma,
                                         derive_seed(seed ^ kNoiseSalt, static_cast<std::uint64_t>(period)));
    return dispatch::rolling_mpc(day, policy.theta, battery, grid_cap, forecaster);
  } catch (const InfeasibleError& e) {
    throw InfeasibleError("period " + std::to_string(period) + ": " + e.what());
  }
}

// Period loop until end of life or the horizon. `draw` returns the uniform for a sampled transition, or a
// negative value for a worst-case transition at `q`.
template <typename Draw>
LifecycleTrace run(const Policy& policy, const Setup& setup, const Models& models, double q, std::uint64_t seed,
                   Draw&& draw, const SimulationOptions& options) {
  const auto& cfg = setup.config;
  LifecycleTrace trace;
  std::vector<double> costs;
  double capacity = cfg.c0_kwh;
  int n = 0;
  while (n < cfg.n0_periods && capacity >= cfg.c_min()) {
    ++n;
    PeriodRecord r;
    r.period = n;
    r.season = (n - 1) % 4;
    r.capacity_in = capacity;
    const auto day = dispatch_period(policy, setup, n, capacity, seed);
    r.aggregates = day.aggregates;
    r.efc = period_efc(day.aggregates, cfg.c0_kwh, cfg.day_scale);
    r.dod = day.aggregates.band() / cfg.c0_kwh;
    const double ambient = setup.ambient(n);
    const auto battery = setup.battery_at(capacity);
    const auto x_cyc = dispatch::aggregates_to_features(day.aggregates, battery, ambient);
    const auto x_cal = calendar_features(capacity, ambient);
    const auto worst = rates_at_quantile(models, x_cyc, x_cal, q);
    r.capacity_worst = capacity_transition(capacity, r.efc, worst, cfg.gamma_days);
    const double u = draw();
    r.rates = u < 0.0 ? worst : sampled_rates(models, x_cyc, x_cal, u);
    r.capacity_out = u < 0.0 ? r.capacity_worst : capacity_transition(capacity, r.efc, r.rates, cfg.gamma_days);
    r.op_cost = day.aggregates.operational_cost * cfg.day_scale;
    r.discounted_cost = r.op_cost / std::pow(1.0 + cfg.interest_per_period, n);
    if (options.log_periods) {
      spdlog::info("period {} C={:.3f} kWh EFC={:.3f} g={:.2f} $", n, r.capacity_out, r.efc, r.op_cost);
    }
    capacity = r.capacity_out;
    costs.push_back(r.op_cost);
    trace.records.push_back(r);
  }
  trace.life_periods = n;
  trace.termination = capacity < cfg.c_min() ? Termination::kEndOfLife : Termination::kProjectHorizon;
  trace.total_cost = replacement_chain_cost(costs, n, cfg.n0_periods, cfg.interest_per_period, cfg.invest_usd);
  return trace;
}

}  // namespace

LifecycleTrace simulate_lifecycle(const Policy& policy, const Setup& setup, const Models& models, double q,
                                  std::uint64_t seed, const SimulationOptions& options) {
  return run(policy, setup, models, q, seed, [] { return -1.0; }, options);
}

LifecycleTrace simulate_sampled_path(const Policy& policy, const Setup& setup, const Models& models,
                                     std::uint64_t seed, std::uint64_t path_seed, const SimulationOptions& options) {
  Rng rng(path_seed);
  return run(policy, setup, models, setup.config.quantile, seed, [&rng] { return uniform01(rng); }, options);
}

MonteCarloSummary monte_carlo_lifecycle(const Policy& policy, const Setup& setup, const Models& models, int n_paths,
                                        std::uint64_t seed) {
  if (n_paths < 1) throw ConfigError("Monte Carlo needs at least one path");
  MonteCarloSummary mc;
  std::vector<double> costs;
  for (int k = 0; k < n_paths; ++k) {
    auto trace = simulate_sampled_path(policy, setup, models, seed, derive_seed(seed, static_cast<std::uint64_t>(k)));
    for (const auto& r : trace.records) {
      ++mc.transitions;
      if (r.capacity_out >= r.capacity_worst) ++mc.dominated;
    }
    mc.mean_life_days += trace.life_days(setup.config.gamma_days);
    costs.push_back(trace.total_cost);
    mc.paths.push_back(std::move(trace));
  }
  mc.mean_life_days /= n_paths;
  mc.mean_cost = std::accumulate(costs.begin(), costs.end(), 0.0) / n_paths;
  mc.cost_q90 = gbt::empirical_quantile(costs, 0.90);
  mc.cost_q95 = gbt::empirical_quantile(costs, 0.95);
  return mc;
}

}  // namespace gridlife::lifecycle
