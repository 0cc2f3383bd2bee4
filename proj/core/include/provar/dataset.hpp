#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace provar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A randomized two-arm trial: covariates X, assignment W, outcome Y.
///
/// Missing covariate cells are stored as quiet NaN until imputed; the
/// treatment and outcome are always complete. Instances are immutable.
class TrialDataset {
 public:
  TrialDataset(Matrix covariates, Vector treatment, Vector outcome,
               std::vector<std::string> covariate_names);

  const Matrix& covariates() const { return covariates_; }
  const Vector& treatment() const { return treatment_; }
  const Vector& outcome() const { return outcome_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  std::size_t size() const { return static_cast<std::size_t>(outcome_.size()); }
  std::size_t num_covariates() const { return names_.size(); }
  std::size_t n_treated() const { return n1_; }
  std::size_t n_control() const { return size() - n1_; }
  /// Empirical allocation n1 / n.
  double treated_fraction() const { return static_cast<double>(n1_) / static_cast<double>(size()); }

  bool has_missing() const;

  /// Copy with missing covariates filled in. Uses `means` when supplied,
  /// otherwise observed column means. Returns the means used.
  std::pair<TrialDataset, Vector> imputed(const std::optional<Vector>& means = std::nullopt) const;

  /// Same subjects, new outcome vector.
  TrialDataset with_outcome(Vector outcome) const;
  /// Same subjects with treatment labels flipped (W -> 1 - W).
  TrialDataset with_swapped_arms() const;

 private:
  Matrix covariates_;
  Vector treatment_;
  Vector outcome_;
  std::vector<std::string> names_;
  std::size_t n1_ = 0;
};

/// Historical (external) control data used to train prognostic models.
class HistoricalDataset {
 public:
  HistoricalDataset(Matrix covariates, Vector outcome, std::vector<std::string> covariate_names);

  const Matrix& covariates() const { return covariates_; }
  const Vector& outcome() const { return outcome_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  std::size_t size() const { return static_cast<std::size_t>(outcome_.size()); }
  std::size_t num_covariates() const { return names_.size(); }
  bool has_missing() const;

 private:
  Matrix covariates_;
  Vector outcome_;
  std::vector<std::string> names_;
};

struct CsvLoadInfo {
  std::size_t rows_read = 0;
  /// Rows discarded because the outcome or treatment cell was empty.
  std::size_t rows_dropped = 0;
  std::size_t missing_covariate_cells = 0;
};

TrialDataset read_trial_csv(std::istream& in, const std::string& outcome_col,
                            const std::string& treatment_col, CsvLoadInfo* info = nullptr);
TrialDataset load_trial_csv(const std::string& path, const std::string& outcome_col,
                            const std::string& treatment_col, CsvLoadInfo* info = nullptr);

HistoricalDataset read_historical_csv(std::istream& in, const std::string& outcome_col,
                                      CsvLoadInfo* info = nullptr);
HistoricalDataset load_historical_csv(const std::string& path, const std::string& outcome_col,
                                      CsvLoadInfo* info = nullptr);

/// Writes outcome, treatment, then covariates with round-trip precision.
void write_trial_csv(std::ostream& out, const TrialDataset& trial, const std::string& outcome_col,
                     const std::string& treatment_col);

/// Replaces NaN cells column by column. Throws ValidationError if a column
/// has no observed value and no supplied mean.
std::pair<Matrix, Vector> impute_column_means(const Matrix& matrix,
                                              const std::optional<Vector>& means = std::nullopt);

enum class ColumnRole {
  intercept,
  treatment,
  covariate,
  score,
  treatment_x_covariate,
  treatment_x_score,
};

struct ColumnTag {
  ColumnRole role;
  /// Covariate index for covariate roles, 0 otherwise.
  std::size_t index = 0;
  friend bool operator==(const ColumnTag&, const ColumnTag&) = default;
};

enum class Centering {
  /// Subtract the analysed sample's column means (the ANCOVA II family).
  empirical,
  /// Raw columns (ANCOVA I as defined with uncentered regressors).
  none,
};

/// Regression design Z with a record of what each column is.
struct DesignMatrix {
  Matrix columns;
  std::vector<ColumnTag> layout;
  std::vector<std::string> names;
  /// Means subtracted from treatment, covariates and score (base columns, in order).
  Vector centering_means;

  std::size_t rows() const { return static_cast<std::size_t>(columns.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(columns.cols()); }
  /// Column index of a tag; throws if absent.
  std::size_t index_of(ColumnTag tag) const;
  std::size_t treatment_index() const { return index_of({ColumnRole::treatment, 0}); }
};

/// Builds [1, W~, X~, M~, W~X~, W~M~] restricted by the flags. `scores`
/// empty means no prognostic score. The trial must be fully imputed.
DesignMatrix build_design(const TrialDataset& trial, std::span<const double> scores,
                          bool include_covariates, bool include_interactions,
                          Centering centering = Centering::empirical);

}  // namespace provar
