#include "provar/estimators.hpp"

#include "provar/error.hpp"
#include "provar/normal.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace provar {

std::string_view to_string(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::unadjusted:
      return "unadjusted";
    case EstimatorTag::ancova1:
      return "ancova1";
    case EstimatorTag::ancova2:
      return "ancova2";
    case EstimatorTag::prognostic:
      return "prognostic";
    case EstimatorTag::prognostic_no_interaction:
      return "prognostic_no_interaction";
  }
  return "unknown";
}

EstimatorTag parse_estimator_tag(std::string_view name) {
  for (auto tag : {EstimatorTag::unadjusted, EstimatorTag::ancova1, EstimatorTag::ancova2,
                   EstimatorTag::prognostic, EstimatorTag::prognostic_no_interaction}) {
    if (name == to_string(tag)) return tag;
  }
  throw ValidationError("unknown estimator '" + std::string(name) + "'");
}

bool needs_score(EstimatorTag tag) {
  return tag == EstimatorTag::prognostic || tag == EstimatorTag::prognostic_no_interaction;
}

void to_json(nlohmann::json& j, const EffectEstimate& e) {
  j = nlohmann::json{{"estimator_tag", to_string(e.estimator_tag)},
                     {"tau_hat", e.tau_hat},
                     {"std_error", e.std_error},
                     {"ci", {e.ci_low, e.ci_high}},
                     {"p_value", e.p_value},
                     {"alpha", e.alpha},
                     {"n0", e.n0},
                     {"n1", e.n1},
                     {"q", e.q}};
}

namespace {

EffectEstimate finish(const TrialDataset& trial, const DesignMatrix& design, EstimatorTag tag,
                      const InferenceOptions& opts) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const OlsFit fit = fit_ols(design, trial.outcome());
  const RobustCovariance cov = sandwich_covariance(design, trial.outcome(), fit, opts.flavor);
  const std::size_t k = design.treatment_index();

  EffectEstimate e;
  e.estimator_tag = tag;
  e.tau_hat = fit.coefficients[static_cast<Eigen::Index>(k)];
  e.std_error = std::sqrt(std::max(0.0, cov.matrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))));
  const double z = normal_quantile(1.0 - opts.alpha / 2.0);
  e.ci_low = e.tau_hat - z * e.std_error;
  e.ci_high = e.tau_hat + z * e.std_error;
  if (e.std_error > 0.0) {
    e.p_value = two_sided_p_value(e.tau_hat / e.std_error);
  } else {
    e.p_value = e.tau_hat == 0.0 ? 1.0 : 0.0;
  }
  e.alpha = opts.alpha;
  e.n0 = trial.n_control();
  e.n1 = trial.n_treated();
  e.q = design.cols();
  return e;
}

const TrialDataset& require_complete(const TrialDataset& trial) {
  if (trial.has_missing()) throw ValidationError("trial covariates contain missing values; impute first");
  return trial;
}

}  // namespace

EffectEstimate diff_in_means(const TrialDataset& trial, const InferenceOptions& opts) {
  const auto design = build_design(require_complete(trial), {}, false, false);
  return finish(trial, design, EstimatorTag::unadjusted, opts);
}

EffectEstimate ancova1(const TrialDataset& trial, const InferenceOptions& opts) {
  const auto design = build_design(require_complete(trial), {}, true, false, Centering::none);
  return finish(trial, design, EstimatorTag::ancova1, opts);
}

EffectEstimate ancova2(const TrialDataset& trial, std::span<const double> scores, bool include_interactions,
                       const InferenceOptions& opts) {
  EstimatorTag tag = EstimatorTag::ancova2;
  if (!scores.empty()) {
    tag = include_interactions ? EstimatorTag::prognostic : EstimatorTag::prognostic_no_interaction;
  }
  return adjusted_estimate(trial, scores, true, include_interactions, tag, opts);
}

EffectEstimate adjusted_estimate(const TrialDataset& trial, std::span<const double> scores,
                                 bool include_covariates, bool include_interactions, EstimatorTag tag,
                                 const InferenceOptions& opts) {
  const auto design = build_design(require_complete(trial), scores, include_covariates, include_interactions);
  return finish(trial, design, tag, opts);
}

EffectEstimate estimate(EstimatorTag tag, const TrialDataset& trial, std::span<const double> scores,
                        const InferenceOptions& opts) {
  switch (tag) {
    case EstimatorTag::unadjusted:
      return diff_in_means(trial, opts);
    case EstimatorTag::ancova1:
      return ancova1(trial, opts);
    case EstimatorTag::ancova2:
      return ancova2(trial, {}, true, opts);
    case EstimatorTag::prognostic:
    case EstimatorTag::prognostic_no_interaction:
      if (scores.empty()) {
        throw ValidationError(std::string(to_string(tag)) + " requires prognostic scores");
      }
      return ancova2(trial, scores, tag == EstimatorTag::prognostic, opts);
  }
  throw ValidationError("unknown estimator tag");
}

}  // namespace provar
