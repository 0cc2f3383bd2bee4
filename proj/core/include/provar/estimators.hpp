#pragma once

#include "provar/dataset.hpp"
#include "provar/ols.hpp"

#include <nlohmann/json_fwd.hpp>

#include <span>
#include <string_view>

namespace provar {

enum class EstimatorTag {
  unadjusted,
  ancova1,
  ancova2,
  prognostic,
  prognostic_no_interaction,
};

std::string_view to_string(EstimatorTag tag);
EstimatorTag parse_estimator_tag(std::string_view name);
/// True for the two estimators that need a prognostic score.
bool needs_score(EstimatorTag tag);

/// Point estimate of the difference in means with robust inference.
struct EffectEstimate {
  EstimatorTag estimator_tag = EstimatorTag::unadjusted;
  double tau_hat = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  /// Number of regression columns.
  std::size_t q = 0;

  bool covers(double tau) const { return ci_low <= tau && tau <= ci_high; }
};

void to_json(nlohmann::json& j, const EffectEstimate& e);

struct InferenceOptions {
  double alpha = 0.05;
  HcFlavor flavor = HcFlavor::HC0;
};

/// Ybar1 - Ybar0 via OLS on [1, W~].
EffectEstimate diff_in_means(const TrialDataset& trial, const InferenceOptions& opts = {});

/// OLS on uncentered [1, W, X] without interactions.
EffectEstimate ancova1(const TrialDataset& trial, const InferenceOptions& opts = {});

/// OLS on the centered design [1, W~, X~, (M~), W~X~, (W~M~)].
///
/// Without scores this is ANCOVA II; with scores it is the prognostic
/// estimator, or `prognostic_no_interaction` when interactions are off.
EffectEstimate ancova2(const TrialDataset& trial, std::span<const double> scores,
                       bool include_interactions, const InferenceOptions& opts = {});

/// Fully general centered adjustment; the tag is supplied by the caller.
EffectEstimate adjusted_estimate(const TrialDataset& trial, std::span<const double> scores,
                                 bool include_covariates, bool include_interactions, EstimatorTag tag,
                                 const InferenceOptions& opts = {});

/// Dispatches on the tag. `scores` is required for the prognostic tags.
EffectEstimate estimate(EstimatorTag tag, const TrialDataset& trial, std::span<const double> scores,
                        const InferenceOptions& opts = {});

}  // namespace provar
