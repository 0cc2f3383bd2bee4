#pragma once

#include "provar/dataset.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace provar {

/// Bagged-CART configuration. Every split considers all features.
struct ForestHyperparams {
  std::size_t n_trees = 1000;
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One node of a regression tree. Leaves have feature == -1; an internal
/// node sends x[feature] <= threshold to `left` and the rest to left + 1.
struct TreeNode {
  std::int32_t feature = -1;
  std::int32_t left = -1;
  double threshold = 0.0;
  double value = 0.0;
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;

 private:
  std::vector<TreeNode> nodes_;
};

/// Grows a CART regression tree on the rows `sample` of (x, y); repeated
/// row indices act as bootstrap weights. Splits maximise the reduction in
/// squared error over all features at midpoints between consecutive
/// distinct values; ties go to the lowest feature, then lowest threshold.
/// A node becomes a leaf when its outcomes are all equal, it holds fewer
/// than 2 * min_leaf samples, or no split leaves min_leaf on both sides.
RegressionTree grow_regression_tree(const Matrix& x, const Vector& y, std::span<const std::size_t> sample,
                                    std::size_t min_leaf);

enum class LearnerTag { linear, forest };

std::string_view to_string(LearnerTag tag);
LearnerTag parse_learner_tag(std::string_view name);

/// Trained map from covariates to a predicted control outcome, plus the
/// imputation means captured at training time. Immutable; prediction is
/// deterministic and safe to call concurrently.
class FittedPrognosticModel {
 public:
  static FittedPrognosticModel make_linear(std::vector<std::string> covariate_names, Vector imputation_means,
                                           Vector coefficients);
  static FittedPrognosticModel make_forest(std::vector<std::string> covariate_names, Vector imputation_means,
                                           std::vector<RegressionTree> trees, ForestHyperparams params);

  LearnerTag learner() const { return learner_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const Vector& imputation_means() const { return means_; }
  /// Intercept followed by one slope per covariate (linear learner only).
  const Vector& coefficients() const { return coefficients_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestHyperparams& hyperparams() const { return params_; }

  /// Prediction for one complete covariate row.
  double predict(std::span<const double> x) const;
  /// Predictions for every row; NaN cells take the stored training means.
  Vector predict(const Matrix& x) const;

  nlohmann::json to_json() const;
  static FittedPrognosticModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static FittedPrognosticModel load(const std::string& path);

 private:
  FittedPrognosticModel() = default;

  LearnerTag learner_ = LearnerTag::linear;
  std::vector<std::string> names_;
  Vector means_;
  Vector coefficients_;
  std::vector<RegressionTree> trees_;
  ForestHyperparams params_;
};

/// Version string written into every model file.
inline constexpr std::string_view kModelFormat = "provar-model-1";

/// OLS of Y' on [1, X'] after mean imputation.
FittedPrognosticModel train_linear(const HistoricalDataset& hist);

/// Bagged regression trees. Tree t draws its bootstrap sample from the
/// substream (seed, t), so results do not depend on `workers`.
FittedPrognosticModel train_forest(const HistoricalDataset& hist, const ForestHyperparams& params,
                                   std::size_t workers = 1);

/// M = m(X) for every trial subject, imputing with the model's training
/// means. Throws SchemaError unless the covariate names match in order.
Vector score_trial(const FittedPrognosticModel& model, const TrialDataset& trial);

}  // namespace provar
