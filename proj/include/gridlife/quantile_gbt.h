#ifndef GRIDLIFE_QUANTILE_GBT_H
#define GRIDLIFE_QUANTILE_GBT_H

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridlife/degradation_dataset.h"

namespace gridlife::gbt {

/// Pinball loss of prediction `r_hat` for observation `r` at quantile `q`.
double pinball_loss(double r, double r_hat, double q);

/// Minimizer of the summed pinball loss over `values`: the element of rank
/// ceil(q * n) in ascending order. `values` need not be sorted.
double empirical_quantile(std::span<const double> values, double q);

struct QuantileSpec {
  std::vector<double> quantiles{0.05, 0.10, 0.50, 0.80, 0.85, 0.90, 0.95};

  /// Strictly increasing, each in (0,1), non-empty; throws ConfigError.
  void validate() const;
};

struct Hyperparams {
  int rounds = 200;
  double learning_rate = 0.1;
  int max_depth = 4;
  int min_samples_leaf = 10;
  int patience = 20;
  double subsample = 0.8;
  bool early_stopping = true;
  // After boosting, shift the base score by the validation q-quantile of
  // the remaining residuals.
  bool refit_intercept = true;
};

struct TreeParams {
  int max_depth = 4;
  int min_samples_leaf = 10;
};

// Flattened regression tree. Node 0 is the root; a node is a leaf when
// feature[i] < 0. Rows with x[feature] < threshold go left.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;

  double predict(std::span<const double> x) const;
  int depth() const;
  std::size_t size() const { return feature.size(); }
};

// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t n_features = 0;
  std::vector<double> values;

  std::size_t rows() const { return n_features ? values.size() / n_features : 0; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * n_features, n_features};
  }
};

/// Greedy tree on residual targets: splits maximize the reduction of summed
/// pinball loss, leaves hold the empirical q-quantile of their targets.
/// `rows` selects the training rows (all rows when empty).
Tree fit_tree(std::span<const double> targets, const FeatureMatrix& features, double q,
              const TreeParams& params, std::span<const std::size_t> rows = {});

struct Forest {
  double quantile = 0.5;
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;
  // Validation pinball loss after round 0 and after each accepted round.
  std::vector<double> validation_loss;

  double predict(std::span<const double> x) const;
};

const std::vector<std::string>& feature_names(data::AgingMode mode);

/// Feature vector of a sample: (C, T, DOD, p_chg, p_dis) for cyclic, (C, T) for calendar.
std::vector<double> features_of(const data::DegradationSample& sample);

/// Samples of the given mode as a feature matrix plus labels.
FeatureMatrix feature_matrix(std::span<const data::DegradationSample> samples, data::AgingMode mode,
                             std::vector<double>* labels = nullptr);

// Anything that maps a feature vector to a sorted vector of quantile rates.
class RateModel {
 public:
  virtual ~RateModel() = default;
  virtual const std::vector<double>& quantiles() const = 0;
  /// Ascending rate vector, one entry per quantile.
  virtual std::vector<double> predict_quantiles(std::span<const double> x) const = 0;
  /// Projects a feature vector onto the region covered by training data.
  virtual std::vector<double> clamp_features(std::span<const double> x) const {
    return {x.begin(), x.end()};
  }
  /// Index of `q` in quantiles(); throws ConfigError naming the available set.
  std::size_t quantile_index(double q) const;
};

class QuantileEnsemble final : public RateModel {
 public:
  QuantileEnsemble() = default;
  QuantileEnsemble(data::AgingMode mode, std::vector<Forest> forests, Hyperparams hyperparams,
                   std::vector<double> feature_min, std::vector<double> feature_max);

  data::AgingMode mode() const { return mode_; }
  const std::vector<double>& quantiles() const override { return quantiles_; }
  const std::vector<Forest>& forests() const { return forests_; }
  const Hyperparams& hyperparams() const { return hyperparams_; }
  const std::vector<double>& feature_min() const { return feature_min_; }
  const std::vector<double>& feature_max() const { return feature_max_; }

  std::vector<double> predict_quantiles(std::span<const double> x) const override;
  /// Per-quantile predictions before sorting.
  std::vector<double> predict_unsorted(std::span<const double> x) const;
  std::vector<double> clamp_features(std::span<const double> x) const override;

  nlohmann::json to_json() const;
  static QuantileEnsemble from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static QuantileEnsemble load(const std::filesystem::path& path);

 private:
  void check_schema(std::span<const double> x) const;

  data::AgingMode mode_ = data::AgingMode::kCyclic;
  std::vector<double> quantiles_;
  std::vector<Forest> forests_;
  Hyperparams hyperparams_;
  std::vector<double> feature_min_;
  std::vector<double> feature_max_;
};

/// Trains one forest per quantile on samples of `mode`. The validation set
/// drives early stopping: a round is kept only if it does not raise the
/// validation pinball loss, and training stops after `patience` rounds
/// without improvement.
QuantileEnsemble train(std::span<const data::DegradationSample> train_set,
                       std::span<const data::DegradationSample> validation_set, data::AgingMode mode,
                       const QuantileSpec& spec, const Hyperparams& hyperparams, std::uint64_t seed);

/// Inverse-CDF draw through (quantile, rate) knots: piecewise linear between
/// knots, flat beyond the extreme quantiles.
double sample_rate(std::span<const double> quantiles, std::span<const double> sorted_rates, double u);

}  // namespace gridlife::gbt

#endif  // GRIDLIFE_QUANTILE_GBT_H
