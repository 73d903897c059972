#include "gridlife/config.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "gridlife/csv.h"
#include "gridlife/dispatch.h"
#include "gridlife/error.h"
#include "gridlife/lifecycle.h"
#include "gridlife/quantile_gbt.h"
#include "gridlife/tuner.h"

namespace gridlife::config {
namespace {

std::string quantile_list(const std::vector<double>& qs) {
  std::string text;
  for (double q : qs) text += (text.empty() ? "" : ", ") + csv::format_number(q);
  return text;
}

// Scenario rows checked one by one so every bad step is reported with its line.
void check_scenario(const std::filesystem::path& path, double tau_h, Validation& v) {
  csv::Table table;
  try {
    table = csv::read(path);
    csv::require_header(table, {"t", "pv_kw", "load_kw", "buy_price", "sell_price"});
  } catch (const std::exception& e) {
    v.errors.push_back(e.what());
    return;
  }
  if (table.rows.empty()) v.errors.push_back(path.string() + ": scenario has no steps");
  bool clean = true;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = path.string() + ":" + std::to_string(r + 2) + ": step " + std::to_string(r) + ": ";
    try {
      const double pv = table.number(r, 1), load = table.number(r, 2);
      const double buy = table.number(r, 3), sell = table.number(r, 4);
      if (static_cast<std::size_t>(table.number(r, 0)) != r) v.errors.push_back(where + "t must count 0,1,2,...");
      if (pv < 0.0 || load < 0.0) v.errors.push_back(where + "PV and load must be non-negative");
      if (buy < 0.0 || sell < 0.0) v.errors.push_back(where + "prices must be non-negative");
      if (sell > buy) {
        v.errors.push_back(where + "sell price " + csv::format_number(sell) + " exceeds buy price " +
                           csv::format_number(buy));
      }
    } catch (const std::exception& e) {
      v.errors.push_back(e.what());
      clean = false;
    }
  }
  if (clean && v.errors.empty()) {
    const auto day = dispatch::DayScenario::load_csv(path, tau_h);
    v.normalized["scenario"] = {{"path", path.string()}, {"steps", day.steps()}, {"tau_h", tau_h}};
  }
}

template <typename F>
void guarded(Validation& v, const std::filesystem::path& path, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    const std::string what = e.what();
    v.errors.push_back(what.rfind(path.string(), 0) == 0 ? what : path.string() + ": " + what);
  }
}

}  // namespace

std::string Validation::report() const {
  std::string text;
  for (const auto& e : errors) text += (text.empty() ? "" : "\n") + e;
  return text;
}

Validation validate_config(const Bundle& b) {
  Validation v;
  std::optional<lifecycle::LifecycleConfig> life;
  std::optional<gbt::QuantileEnsemble> cyc, cal;

  if (b.lifecycle) {
    guarded(v, *b.lifecycle, [&] {
      life = lifecycle::LifecycleConfig::load(*b.lifecycle);
      if (life->c_min_frac >= 1.0) {
        v.errors.push_back(b.lifecycle->string() + ": end-of-life capacity must lie below the rated capacity");
      }
      const auto setup = lifecycle::Setup::from_config(*life, b.lifecycle->parent_path());
      v.normalized["lifecycle"] = life->to_json();
    });
  }
  if (b.battery) {
    guarded(v, *b.battery, [&] { v.normalized["battery"] = dispatch::BatteryConfig::load(*b.battery).to_json(); });
  }
  if (b.pso) {
    guarded(v, *b.pso, [&] { v.normalized["pso"] = tuner::PsoConfig::load(*b.pso).to_json(); });
  }
  if (b.scenario) check_scenario(*b.scenario, b.tau_h, v);
  if (b.model_cyclic) {
    guarded(v, *b.model_cyclic, [&] {
      cyc = gbt::QuantileEnsemble::load(*b.model_cyclic);
      if (cyc->mode() != data::AgingMode::kCyclic) throw ConfigError("expected a cyclic model");
      v.normalized["model_cyclic"] = {{"path", b.model_cyclic->string()}, {"quantiles", cyc->quantiles()}};
    });
  }
  if (b.model_calendar) {
    guarded(v, *b.model_calendar, [&] {
      cal = gbt::QuantileEnsemble::load(*b.model_calendar);
      if (cal->mode() != data::AgingMode::kCalendar) throw ConfigError("expected a calendar model");
      v.normalized["model_calendar"] = {{"path", b.model_calendar->string()}, {"quantiles", cal->quantiles()}};
    });
  }

  std::optional<double> q = b.quantile;
  if (!q && life) q = life->quantile;
  if (q) {
    v.normalized["quantile"] = *q;
    auto check_q = [&](const std::optional<gbt::QuantileEnsemble>& model, const std::filesystem::path& path) {
      if (!model) return;
      const auto& qs = model->quantiles();
      if (std::none_of(qs.begin(), qs.end(), [&](double x) { return std::abs(x - *q) < 1e-12; })) {
        v.errors.push_back(path.string() + ": quantile " + csv::format_number(*q) +
                           " is not trained (available: " + quantile_list(qs) + ")");
      }
    };
    if (b.model_cyclic) check_q(cyc, *b.model_cyclic);
    if (b.model_calendar) check_q(cal, *b.model_calendar);
  }
  return v;
}

nlohmann::json require_valid(const Bundle& bundle) {
  auto v = validate_config(bundle);
  if (!v.ok()) throw ConfigError(v.report());
  return v.normalized;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto it = std::istreambuf_iterator<char>(in); it != std::istreambuf_iterator<char>(); ++it) {
    h ^= static_cast<unsigned char>(*it);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace gridlife::config
