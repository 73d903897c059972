#include "gridlife/quantile_gbt.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gridlife/error.h"
#include "gridlife/random.h"

namespace gridlife::gbt {
namespace {

void require_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError("quantile must lie in (0,1), got " + std::to_string(q));
  }
}

// 0-based rank of the empirical q-quantile among m sorted values.
std::size_t quantile_rank(std::size_t m, double q) {
  const double pos = std::ceil(q * static_cast<double>(m) - 1e-9);
  const auto k = static_cast<std::size_t>(std::max(pos, 1.0)) - 1;
  return std::min(k, m - 1);
}

// Fenwick tree over target ranks 1..n holding counts and sums, used to read
// off order statistics of a growing prefix and of its complement.
class RankIndex {
 public:
  explicit RankIndex(std::size_t n) : n_(n), count_(n + 1, 0), sum_(n + 1, 0.0) {
    top_ = 1;
    while (top_ * 2 <= n_) top_ *= 2;
  }

  void add(std::size_t rank, double value) {
    for (std::size_t i = rank; i <= n_; i += i & (~i + 1)) {
      ++count_[i];
      sum_[i] += value;
    }
  }

  double prefix_sum(std::size_t rank) const {
    double s = 0.0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += sum_[i];
    return s;
  }

  // Rank of the k-th (1-based) inserted element.
  std::size_t kth(std::size_t k) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step /= 2) {
      if (pos + step <= n_ && static_cast<std::size_t>(count_[pos + step]) < k) {
        pos += step;
        k -= static_cast<std::size_t>(count_[pos]);
      }
    }
    return pos + 1;
  }

  // Rank of the k-th (1-based) element NOT inserted. A Fenwick node at index
  // i covers (i & -i) consecutive ranks, all of which exist in the universe.
  std::size_t kth_missing(std::size_t k) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step /= 2) {
      if (pos + step <= n_) {
        const std::size_t missing = step - static_cast<std::size_t>(count_[pos + step]);
        if (missing < k) {
          pos += step;
          k -= missing;
        }
      }
    }
    return pos + 1;
  }

 private:
  std::size_t n_;
  std::size_t top_;
  std::vector<int> count_;
  std::vector<double> sum_;
};

// Summed pinball loss of m values around their own empirical quantile
// `pivot`, given the k values ranked below it and their sum.
double set_loss(double q, std::size_t m, std::size_t k, double pivot, double sum_below, double total) {
  const double above_count = static_cast<double>(m - k - 1);
  const double above_sum = total - sum_below - pivot;
  return q * (above_sum - above_count * pivot) + (1.0 - q) * (static_cast<double>(k) * pivot - sum_below);
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const double> targets, const FeatureMatrix& features, double q, const TreeParams& params)
      : targets_(targets), features_(features), q_(q), params_(params) {}

  Tree build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(0.0);
    return static_cast<int>(tree_.feature.size()) - 1;
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int node = new_node();
    std::vector<double> node_targets(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) node_targets[i] = targets_[rows[i]];
    tree_.value[node] = empirical_quantile(node_targets, q_);

    const auto min_leaf = static_cast<std::size_t>(std::max(params_.min_samples_leaf, 1));
    if (depth >= params_.max_depth || rows.size() < 2 * min_leaf) return node;

    const Split split = best_split(rows, min_leaf);
    if (split.feature < 0) return node;

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (features_.row(r)[split.feature] < split.threshold ? left_rows : right_rows).push_back(r);
    }
    tree_.feature[node] = split.feature;
    tree_.threshold[node] = split.threshold;
    const int left = grow(std::move(left_rows), depth + 1);
    tree_.left[node] = left;
    const int right = grow(std::move(right_rows), depth + 1);
    tree_.right[node] = right;
    return node;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
  };

  Split best_split(const std::vector<std::size_t>& rows, std::size_t min_leaf) const {
    const std::size_t n = rows.size();
    // Rank rows by target (ties broken by row id) so every row owns a unique rank.
    std::vector<std::size_t> by_target(n);
    std::iota(by_target.begin(), by_target.end(), std::size_t{0});
    std::sort(by_target.begin(), by_target.end(), [&](std::size_t a, std::size_t b) {
      const double ta = targets_[rows[a]], tb = targets_[rows[b]];
      return ta < tb || (ta == tb && rows[a] < rows[b]);
    });
    std::vector<std::size_t> rank_of(n);
    std::vector<double> sorted(n), cumulative(n + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      rank_of[by_target[r]] = r + 1;
      sorted[r] = targets_[rows[by_target[r]]];
      cumulative[r + 1] = cumulative[r] + sorted[r];
    }
    const double total = cumulative[n];
    const std::size_t kp = quantile_rank(n, q_);
    const double parent = set_loss(q_, n, kp, sorted[kp], cumulative[kp], total);

    Split best;
    double best_gain = 1e-12 * std::max(1.0, std::abs(parent));
    std::vector<std::size_t> order(n);
    for (std::size_t f = 0; f < features_.n_features; ++f) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = features_.row(rows[a])[f], xb = features_.row(rows[b])[f];
        return xa < xb || (xa == xb && rows[a] < rows[b]);
      });
      RankIndex index(n);
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t local = order[i];
        index.add(rank_of[local], sorted[rank_of[local] - 1]);
        left_sum += sorted[rank_of[local] - 1];
        const std::size_t m_left = i + 1;
        const std::size_t m_right = n - m_left;
        if (m_left < min_leaf || m_right < min_leaf) continue;
        const double x_here = features_.row(rows[local])[f];
        const double x_next = features_.row(rows[order[i + 1]])[f];
        if (!(x_here < x_next)) continue;

        const std::size_t kl = quantile_rank(m_left, q_);
        const std::size_t rl = index.kth(kl + 1);
        const double left_loss = set_loss(q_, m_left, kl, sorted[rl - 1], index.prefix_sum(rl - 1), left_sum);

        const std::size_t kr = quantile_rank(m_right, q_);
        const std::size_t rr = index.kth_missing(kr + 1);
        const double right_below = cumulative[rr - 1] - index.prefix_sum(rr - 1);
        const double right_loss = set_loss(q_, m_right, kr, sorted[rr - 1], right_below, total - left_sum);

        const double gain = parent - left_loss - right_loss;
        if (gain > best_gain) {
          best_gain = gain;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (x_here + x_next);
        }
      }
    }
    return best;
  }

  std::span<const double> targets_;
  const FeatureMatrix& features_;
  double q_;
  TreeParams params_;
  Tree tree_;
};

double mean_pinball(std::span<const double> labels, std::span<const double> predictions, double q) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += pinball_loss(labels[i], predictions[i], q);
  return labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
}

nlohmann::json tree_to_json(const Tree& t) {
  return {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left}, {"right", t.right}, {"value", t.value}};
}

Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  t.feature = j.at("feature").get<std::vector<int>>();
  t.threshold = j.at("threshold").get<std::vector<double>>();
  t.left = j.at("left").get<std::vector<int>>();
  t.right = j.at("right").get<std::vector<int>>();
  t.value = j.at("value").get<std::vector<double>>();
  const std::size_t n = t.feature.size();
  if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n) {
    throw DataError("model tree arrays have inconsistent lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (t.feature[i] >= 0) {
      const auto in_range = [n, i](int child) { return child > static_cast<int>(i) && child < static_cast<int>(n); };
      if (!in_range(t.left[i]) || !in_range(t.right[i])) throw DataError("model tree references a missing child");
    } else if (!std::isfinite(t.value[i])) {
      throw DataError("model tree leaf is not finite");
    }
  }
  return t;
}

}  // namespace

double pinball_loss(double r, double r_hat, double q) {
  require_quantile(q);
  return r >= r_hat ? q * (r - r_hat) : (1.0 - q) * (r_hat - r);
}

double empirical_quantile(std::span<const double> values, double q) {
  require_quantile(q);
  if (values.empty()) throw DataError("empirical quantile of an empty set");
  std::vector<double> copy(values.begin(), values.end());
  const std::size_t k = quantile_rank(copy.size(), q);
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k), copy.end());
  return copy[k];
}

void QuantileSpec::validate() const {
  if (quantiles.empty()) throw ConfigError("quantile set is empty");
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) throw ConfigError("quantiles must lie in (0,1)");
    if (i > 0 && !(quantiles[i] > quantiles[i - 1])) throw ConfigError("quantiles must be strictly increasing");
  }
}

double Tree::predict(std::span<const double> x) const {
  int node = 0;
  while (feature[node] >= 0) node = x[feature[node]] < threshold[node] ? left[node] : right[node];
  return value[node];
}

int Tree::depth() const {
  std::vector<int> level(feature.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < feature.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (feature[i] >= 0) {
      level[left[i]] = level[i] + 1;
      level[right[i]] = level[i] + 1;
    }
  }
  return deepest;
}

Tree fit_tree(std::span<const double> targets, const FeatureMatrix& features, double q, const TreeParams& params,
              std::span<const std::size_t> rows) {
  require_quantile(q);
  std::vector<std::size_t> selected(rows.begin(), rows.end());
  if (selected.empty()) {
    selected.resize(features.rows());
    std::iota(selected.begin(), selected.end(), std::size_t{0});
  }
  if (selected.empty()) throw DataError("cannot fit a tree without rows");
  return TreeBuilder(targets, features, q, params).build(std::move(selected));
}

double Forest::predict(std::span<const double> x) const {
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.predict(x);
  return base_score + learning_rate * sum;
}

const std::vector<std::string>& feature_names(data::AgingMode mode) {
  static const std::vector<std::string> cyclic{"capacity_kwh", "temp_c", "dod", "p_chg_kw", "p_dis_kw"};
  static const std::vector<std::string> calendar{"capacity_kwh", "temp_c"};
  return mode == data::AgingMode::kCyclic ? cyclic : calendar;
}

std::vector<double> features_of(const data::DegradationSample& s) {
  if (s.mode == data::AgingMode::kCalendar) return {s.capacity_kwh, s.temp_c};
  return {s.capacity_kwh, s.temp_c, s.dod, s.p_chg_kw, s.p_dis_kw};
}

FeatureMatrix feature_matrix(std::span<const data::DegradationSample> samples, data::AgingMode mode,
                             std::vector<double>* labels) {
  FeatureMatrix m;
  m.n_features = feature_names(mode).size();
  if (labels) labels->clear();
  for (const auto& s : samples) {
    if (s.mode != mode) continue;
    const auto x = features_of(s);
    for (double v : x) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
    if (!std::isfinite(s.rate)) throw DataError("non-finite degradation label");
    m.values.insert(m.values.end(), x.begin(), x.end());
    if (labels) labels->push_back(s.rate);
  }
  return m;
}

std::size_t RateModel::quantile_index(double q) const {
  const auto& qs = quantiles();
  for (std::size_t k = 0; k < qs.size(); ++k) {
    if (std::abs(qs[k] - q) < 1e-12) return k;
  }
  std::ostringstream msg;
  msg << "quantile " << q << " is not trained; available:";
  for (double v : qs) msg << ' ' << v;
  throw ConfigError(msg.str());
}

QuantileEnsemble::QuantileEnsemble(data::AgingMode mode, std::vector<Forest> forests, Hyperparams hyperparams,
                                   std::vector<double> feature_min, std::vector<double> feature_max)
    : mode_(mode),
      forests_(std::move(forests)),
      hyperparams_(hyperparams),
      feature_min_(std::move(feature_min)),
      feature_max_(std::move(feature_max)) {
  for (const auto& f : forests_) quantiles_.push_back(f.quantile);
  QuantileSpec{quantiles_}.validate();
  const std::size_t width = feature_names(mode_).size();
  if (feature_min_.size() != width || feature_max_.size() != width) {
    throw DataError("feature range does not match the " + data::to_string(mode_) + " schema");
  }
}

void QuantileEnsemble::check_schema(std::span<const double> x) const {
  if (x.size() != feature_names(mode_).size()) {
    throw DataError("feature vector has " + std::to_string(x.size()) + " entries, " + data::to_string(mode_) +
                    " model expects " + std::to_string(feature_names(mode_).size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw DataError("feature vector contains a non-finite value");
  }
}

std::vector<double> QuantileEnsemble::predict_unsorted(std::span<const double> x) const {
  check_schema(x);
  std::vector<double> out;
  out.reserve(forests_.size());
  for (const auto& f : forests_) out.push_back(f.predict(x));
  return out;
}

std::vector<double> QuantileEnsemble::predict_quantiles(std::span<const double> x) const {
  auto out = predict_unsorted(x);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> QuantileEnsemble::clamp_features(std::span<const double> x) const {
  check_schema(x);
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], feature_min_[i], feature_max_[i]);
  return out;
}

nlohmann::json QuantileEnsemble::to_json() const {
  nlohmann::json forests = nlohmann::json::array();
  for (const auto& f : forests_) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
    forests.push_back({{"quantile", f.quantile},
                       {"base_score", f.base_score},
                       {"learning_rate", f.learning_rate},
                       {"validation_loss", f.validation_loss},
                       {"trees", std::move(trees)}});
  }
  return {{"schema_version", "gbt-v1"},
          {"mode", data::to_string(mode_)},
          {"features", feature_names(mode_)},
          {"quantiles", quantiles_},
          {"hyperparams",
           {{"rounds", hyperparams_.rounds},
            {"learning_rate", hyperparams_.learning_rate},
            {"max_depth", hyperparams_.max_depth},
            {"min_samples_leaf", hyperparams_.min_samples_leaf},
            {"patience", hyperparams_.patience},
            {"subsample", hyperparams_.subsample},
            {"early_stopping", hyperparams_.early_stopping},
            {"refit_intercept", hyperparams_.refit_intercept}}},
          {"feature_min", feature_min_},
          {"feature_max", feature_max_},
          {"forests", std::move(forests)}};
}

QuantileEnsemble QuantileEnsemble::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema_version").get<std::string>() != "gbt-v1") {
      throw DataError("unsupported model schema '" + doc.at("schema_version").get<std::string>() + "'");
    }
    const auto mode = data::parse_aging_mode(doc.at("mode").get<std::string>());
    if (doc.at("features").get<std::vector<std::string>>() != feature_names(mode)) {
      throw DataError("model feature list does not match the " + data::to_string(mode) + " schema");
    }
    Hyperparams hp;
    const auto& h = doc.at("hyperparams");
    hp.rounds = h.at("rounds").get<int>();
    hp.learning_rate = h.at("learning_rate").get<double>();
    hp.max_depth = h.at("max_depth").get<int>();
    hp.min_samples_leaf = h.at("min_samples_leaf").get<int>();
    hp.patience = h.at("patience").get<int>();
    hp.subsample = h.at("subsample").get<double>();
    hp.early_stopping = h.at("early_stopping").get<bool>();
    hp.refit_intercept = h.value("refit_intercept", false);
    std::vector<Forest> forests;
    for (const auto& fj : doc.at("forests")) {
      Forest f;
      f.quantile = fj.at("quantile").get<double>();
      f.base_score = fj.at("base_score").get<double>();
      f.learning_rate = fj.at("learning_rate").get<double>();
      if (fj.contains("validation_loss")) f.validation_loss = fj.at("validation_loss").get<std::vector<double>>();
      for (const auto& tj : fj.at("trees")) f.trees.push_back(tree_from_json(tj));
      forests.push_back(std::move(f));
    }
    return QuantileEnsemble(mode, std::move(forests), hp, doc.at("feature_min").get<std::vector<double>>(),
                            doc.at("feature_max").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

void QuantileEnsemble::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

QuantileEnsemble QuantileEnsemble::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

QuantileEnsemble train(std::span<const data::DegradationSample> train_set,
                       std::span<const data::DegradationSample> validation_set, data::AgingMode mode,
                       const QuantileSpec& spec, const Hyperparams& hp, std::uint64_t seed) {
  spec.validate();
  if (hp.rounds < 0 || !(hp.learning_rate > 0.0) || hp.max_depth < 0 || hp.min_samples_leaf < 1 ||
      !(hp.subsample > 0.0 && hp.subsample <= 1.0) || hp.patience < 1) {
    throw ConfigError("invalid boosting hyperparameters");
  }
  std::vector<double> y_train, y_val;
  const FeatureMatrix x_train = feature_matrix(train_set, mode, &y_train);
  const FeatureMatrix x_val = feature_matrix(validation_set, mode, &y_val);
  if (y_train.size() < 50) {
    throw DataError("need at least 50 " + data::to_string(mode) + " training samples, got " +
                    std::to_string(y_train.size()));
  }
  if (hp.early_stopping && y_val.empty()) throw DataError("early stopping needs a non-empty validation set");

  const std::size_t width = x_train.n_features;
  std::vector<double> lo(width, std::numeric_limits<double>::infinity());
  std::vector<double> hi(width, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < x_train.rows(); ++r) {
    for (std::size_t f = 0; f < width; ++f) {
      lo[f] = std::min(lo[f], x_train.row(r)[f]);
      hi[f] = std::max(hi[f], x_train.row(r)[f]);
    }
  }

  const TreeParams tree_params{hp.max_depth, hp.min_samples_leaf};
  const std::size_t n = y_train.size();
  const auto n_sub = std::max<std::size_t>(1, static_cast<std::size_t>(hp.subsample * static_cast<double>(n)));

  std::vector<Forest> forests;
  for (std::size_t k = 0; k < spec.quantiles.size(); ++k) {
    const double q = spec.quantiles[k];
    Rng rng(derive_seed(seed, k));
    Forest forest;
    forest.quantile = q;
    forest.learning_rate = hp.learning_rate;
    forest.base_score = empirical_quantile(y_train, q);

    std::vector<double> f_train(n, forest.base_score);
    std::vector<double> f_val(y_val.size(), forest.base_score);
    double current = mean_pinball(y_val, f_val, q);
    double best = current;
    if (!y_val.empty()) forest.validation_loss.push_back(current);

    std::vector<double> residual(n);
    std::vector<std::size_t> pool(n);
    std::vector<double> candidate(y_val.size());
    int stale = 0;
    for (int round = 0; round < hp.rounds; ++round) {
      for (std::size_t i = 0; i < n; ++i) residual[i] = y_train[i] - f_train[i];
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < n_sub && n_sub < n; ++i) {
        const std::size_t j = i + uniform_index(rng, n - i);
        std::swap(pool[i], pool[j]);
      }
      std::vector<std::size_t> rows(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_sub));
      std::sort(rows.begin(), rows.end());
      Tree tree = fit_tree(residual, x_train, q, tree_params, rows);

      if (hp.early_stopping) {
        for (std::size_t i = 0; i < y_val.size(); ++i) candidate[i] = f_val[i] + hp.learning_rate * tree.predict(x_val.row(i));
        const double loss = mean_pinball(y_val, candidate, q);
        if (loss > current) {
          if (++stale >= hp.patience) break;
          continue;
        }
        f_val.swap(candidate);
        current = loss;
        forest.validation_loss.push_back(loss);
        if (current < best - 1e-12 * std::max(1.0, std::abs(best))) {
          best = current;
          stale = 0;
        } else {
          ++stale;
        }
      } else if (!y_val.empty()) {
        for (std::size_t i = 0; i < y_val.size(); ++i) f_val[i] += hp.learning_rate * tree.predict(x_val.row(i));
        forest.validation_loss.push_back(mean_pinball(y_val, f_val, q));
      }
      for (std::size_t i = 0; i < n; ++i) f_train[i] += hp.learning_rate * tree.predict(x_train.row(i));
      forest.trees.push_back(std::move(tree));
      if (hp.early_stopping && stale >= hp.patience) break;
    }
    if (hp.refit_intercept && !y_val.empty()) {
      // Pinball-optimal constant shift on the validation residuals.
      for (std::size_t i = 0; i < y_val.size(); ++i) f_val[i] = forest.predict(x_val.row(i));
      std::vector<double> gap(y_val.size());
      for (std::size_t i = 0; i < y_val.size(); ++i) gap[i] = y_val[i] - f_val[i];
      const double shift = empirical_quantile(gap, q);
      forest.base_score += shift;
      for (double& f : f_val) f += shift;
      forest.validation_loss.push_back(mean_pinball(y_val, f_val, q));
    }
    spdlog::debug("quantile {}: {} trees, validation loss {}", q, forest.trees.size(),
                  forest.validation_loss.empty() ? 0.0 : forest.validation_loss.back());
    forests.push_back(std::move(forest));
  }
  return QuantileEnsemble(mode, std::move(forests), hp, std::move(lo), std::move(hi));
}

double sample_rate(std::span<const double> quantiles, std::span<const double> sorted_rates, double u) {
  if (quantiles.empty() || quantiles.size() != sorted_rates.size()) {
    throw std::invalid_argument("sample_rate needs one rate per quantile");
  }
  if (u <= quantiles.front()) return sorted_rates.front();
  if (u >= quantiles.back()) return sorted_rates.back();
  const auto it = std::upper_bound(quantiles.begin(), quantiles.end(), u);
  const std::size_t k = static_cast<std::size_t>(it - quantiles.begin()) - 1;
  const double w = (u - quantiles[k]) / (quantiles[k + 1] - quantiles[k]);
  return sorted_rates[k] + w * (sorted_rates[k + 1] - sorted_rates[k]);
}

}  // namespace gridlife::gbt
