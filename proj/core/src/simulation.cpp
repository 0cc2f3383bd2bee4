#include "provar/simulation.hpp"

#include "provar/error.hpp"
#include "provar/normal.hpp"
#include "provar/parallel.hpp"
#include "provar/power.hpp"

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace provar {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Substream purposes under (master_seed, scenario index, ...).
enum StreamKey : std::uint64_t {
  kHistoricalStream = 1,
  kForestStream = 2,
  kTrialStream = 3,
  kBoundStream = 4,
};

std::vector<std::string> covariate_names(int dims) {
  std::vector<std::string> names;
  for (int j = 1; j <= dims; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

Matrix uniform_prism(std::size_t n, int dims, double low, double high, RngStream& rng) {
  Matrix x(static_cast<Eigen::Index>(n), dims);
  // Row-major draw order so a row's covariates are consecutive draws.
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform(low, high);
  }
  return x;
}

double row_surface(const MeanSurface& f, const Matrix& x, Eigen::Index i) {
  const double s = x.row(i).sum();
  return f.a * s * s + f.b * s + f.c;
}

// Treatment vector with the requested assignment mechanism.
Vector assign(std::size_t n, double pi1, Assignment assignment, RngStream& rng) {
  Vector w = Vector::Zero(static_cast<Eigen::Index>(n));
  if (assignment == Assignment::bernoulli) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform() < pi1 ? 1.0 : 0.0;
    return w;
  }
  const auto n1 = static_cast<std::size_t>(std::llround(static_cast<double>(n) * pi1));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  for (std::size_t k = 0; k < n1; ++k) w[static_cast<Eigen::Index>(idx[k])] = 1.0;
  return w;
}

double corr(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  const double den = std::sqrt(ac.squaredNorm() * bc.squaredNorm());
  return den > 0.0 ? ac.dot(bc) / den : 0.0;
}

double sd(const Vector& v) {
  const Vector c = v.array() - v.mean();
  return std::sqrt(c.squaredNorm() / static_cast<double>(v.size() - 1));
}

ReplicateResult run_estimators(const TrialDataset& trial, std::span<const double> scores,
                               std::span<const EstimatorTag> tags, const InferenceOptions& opts) {
  ReplicateResult r;
  r.tau_hat.assign(tags.size(), kNaN);
  r.std_error.assign(tags.size(), kNaN);
  for (std::size_t k = 0; k < tags.size(); ++k) {
    try {
      const EffectEstimate e = estimate(tags[k], trial, needs_score(tags[k]) ? scores : std::span<const double>{}, opts);
      r.tau_hat[k] = e.tau_hat;
      r.std_error[k] = e.std_error;
    } catch (const SingularDesignError&) {
    } catch (const ValidationError&) {
    }
  }
  return r;
}

std::optional<BoundCheck> compute_bound(const ScenarioSpec& spec, const SimConfig& config, const ScoreFunction& score,
                                        std::size_t scenario_index) {
  if (config.bound_sample_size < 3) return std::nullopt;
  RngStream rng(config.master_seed, {scenario_index, kBoundStream});
  const CounterfactualSample cf = sample_counterfactuals(spec, config.bound_sample_size, rng);
  Vector m(cf.x.rows());
  std::vector<double> row(static_cast<std::size_t>(cf.x.cols()));
  for (Eigen::Index i = 0; i < cf.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < cf.x.cols(); ++j) row[static_cast<std::size_t>(j)] = cf.x(i, j);
    m[i] = score(row);
  }
  BoundCheck b;
  b.sigma0 = sd(cf.y0);
  b.sigma1 = sd(cf.y1);
  b.rho0 = corr(m, cf.y0);
  b.rho1 = corr(m, cf.y1);
  PowerSpec ps;
  ps.sigma0 = b.sigma0;
  ps.sigma1 = b.sigma1;
  ps.rho0 = b.rho0;
  ps.rho1 = b.rho1;
  ps.pi1 = config.pi1;
  b.variance_bound = variance_bound(ps, config.n_trial);
  ps.rho0 = ps.rho1 = 0.0;
  b.unadjusted_variance = variance_bound(ps, config.n_trial);
  return b;
}

SimulationReport finish_report(const ScenarioSpec& spec, const SimConfig& config, double true_tau,
                               std::span<const ReplicateResult> reps) {
  SimulationReport report;
  report.scenario = spec.name;
  report.true_tau = true_tau;
  report.n_reps = config.n_reps;
  report.n_trial = config.n_trial;
  report.estimators = summarize(config.estimators, reps, true_tau, config.alpha);
  for (const auto& s : report.estimators) {
    if (static_cast<double>(s.failures) > config.max_failure_fraction * static_cast<double>(config.n_reps)) {
      std::ostringstream msg;
      msg << "scenario '" << spec.name << "': estimator " << to_string(s.tag) << " failed on " << s.failures
          << " of " << config.n_reps << " replicates, above the allowed fraction " << config.max_failure_fraction;
      throw Error(msg.str());
    }
  }
  return report;
}

}  // namespace

double MeanSurface::operator()(std::span<const double> x) const {
  double s = 0.0;
  for (double v : x) s += v;
  return a * s * s + b * s + c;
}

void ScenarioSpec::validate() const {
  if (!(hist_low < hist_high)) throw ValidationError("scenario '" + name + "': hist_low must be < hist_high");
  if (!(trial_low < trial_high)) throw ValidationError("scenario '" + name + "': trial_low must be < trial_high");
  if (dims < 1) throw ValidationError("scenario '" + name + "': dims must be >= 1");
  if (!(noise_sd >= 0.0)) throw ValidationError("scenario '" + name + "': noise_sd must be >= 0");
}

double uniform_sum_mean(int dims, double low, double high) { return dims * 0.5 * (low + high); }

double uniform_sum_second_moment(int dims, double low, double high) {
  const double d = dims;
  const double m = 0.5 * (low + high);
  const double ex2 = (low * low + low * high + high * high) / 3.0;
  return d * (d - 1.0) * m * m + d * ex2;
}

double ScenarioSpec::true_tau() const {
  const double es = uniform_sum_mean(dims, trial_low, trial_high);
  const double es2 = uniform_sum_second_moment(dims, trial_low, trial_high);
  return (treated.a - control.a) * es2 + (treated.b - control.b) * es + (treated.c - control.c);
}

void to_json(nlohmann::json& j, const ScenarioSpec& s) {
  j = nlohmann::json{{"name", s.name},         {"hist_low", s.hist_low},   {"hist_high", s.hist_high},
                     {"trial_low", s.trial_low}, {"trial_high", s.trial_high}, {"a_hist", s.hist.a},
                     {"b_hist", s.hist.b},     {"c_hist", s.hist.c},       {"a0", s.control.a},
                     {"b0", s.control.b},      {"c0", s.control.c},        {"a1", s.treated.a},
                     {"b1", s.treated.b},      {"c1", s.treated.c},        {"dims", s.dims},
                     {"noise_sd", s.noise_sd}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& s) {
  s.name = j.value("name", std::string("scenario"));
  s.hist_low = j.at("hist_low").get<double>();
  s.hist_high = j.at("hist_high").get<double>();
  s.trial_low = j.at("trial_low").get<double>();
  s.trial_high = j.at("trial_high").get<double>();
  s.hist = {j.at("a_hist").get<double>(), j.at("b_hist").get<double>(), j.at("c_hist").get<double>()};
  s.control = {j.at("a0").get<double>(), j.at("b0").get<double>(), j.at("c0").get<double>()};
  s.treated = {j.at("a1").get<double>(), j.at("b1").get<double>(), j.at("c1").get<double>()};
  s.dims = j.value("dims", 10);
  s.noise_sd = j.value("noise_sd", 1.0);
  s.validate();
}

std::vector<ScenarioSpec> table1() {
  const MeanSurface quad{0.5, 1.0, 0.0};
  const MeanSurface lin{0.0, 1.0, 0.0};
  std::vector<ScenarioSpec> t;
  t.push_back({"Baseline", -1, 1, -1, 1, quad, quad, quad, 10, 1.0});
  t.push_back({"Strong Effect", -1, 1, -1, 1, quad, quad, {0.5, 1.0, 5.0}, 10, 1.0});
  t.push_back({"Linear", -1, 1, -1, 1, lin, lin, lin, 10, 1.0});
  t.push_back({"Heterogeneous Effect", -1, 1, -1, 1, quad, quad, {0.0, 1.0, 0.0}, 10, 1.0});
  t.push_back({"Surrogate Outcome", -1, 1, -1, 1, {0.5, -1.0, 0.0}, quad, quad, 10, 1.0});
  t.push_back({"Covariate Shift", -1, 0.25, -0.25, 1, quad, quad, quad, 10, 1.0});
  return t;
}

HistoricalDataset sample_historical(const ScenarioSpec& spec, std::size_t n, RngStream& rng) {
  spec.validate();
  Matrix x = uniform_prism(n, spec.dims, spec.hist_low, spec.hist_high, rng);
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = row_surface(spec.hist, x, i) + spec.noise_sd * rng.normal();
  return HistoricalDataset(std::move(x), std::move(y), covariate_names(spec.dims));
}

CounterfactualSample sample_counterfactuals(const ScenarioSpec& spec, std::size_t n, RngStream& rng) {
  spec.validate();
  CounterfactualSample cf;
  cf.x = uniform_prism(n, spec.dims, spec.trial_low, spec.trial_high, rng);
  cf.y0.resize(cf.x.rows());
  cf.y1.resize(cf.x.rows());
  for (Eigen::Index i = 0; i < cf.x.rows(); ++i) {
    cf.y0[i] = row_surface(spec.control, cf.x, i) + spec.noise_sd * rng.normal();
    cf.y1[i] = row_surface(spec.treated, cf.x, i) + spec.noise_sd * rng.normal();
  }
  return cf;
}

TrialDraw sample_trial(const ScenarioSpec& spec, std::size_t n, double pi1, RngStream& rng, Assignment assignment) {
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw ValidationError("sample_trial: pi1 must lie in (0, 1)");
  CounterfactualSample cf = sample_counterfactuals(spec, n, rng);
  const Vector w = assign(n, pi1, assignment, rng);
  Vector y = (w.array() > 0.5).select(cf.y1, cf.y0);
  return {TrialDataset(std::move(cf.x), w, std::move(y), covariate_names(spec.dims)), spec.true_tau()};
}

void SimConfig::validate() const {
  if (n_reps < 1) throw ValidationError("n_reps must be >= 1");
  if (n_trial < 4) throw ValidationError("n_trial must be >= 4");
  if (n_hist < 2) throw ValidationError("n_hist must be >= 2");
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw ValidationError("pi1 must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (estimators.empty()) throw ValidationError("no estimators configured");
  forest.validate();
}

SimConfig SimConfig::desk() { return SimConfig{}; }

SimConfig SimConfig::full() {
  SimConfig c;
  c.n_hist = 10000;
  c.n_reps = 10000;
  c.forest.n_trees = 1000;
  return c;
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  std::vector<std::string> tags;
  for (auto t : c.estimators) tags.emplace_back(to_string(t));
  j = nlohmann::json{{"n_hist", c.n_hist},
                     {"n_trial", c.n_trial},
                     {"pi1", c.pi1},
                     {"n_reps", c.n_reps},
                     {"forest",
                      {{"n_trees", c.forest.n_trees},
                       {"min_leaf", c.forest.min_leaf},
                       {"bootstrap", c.forest.bootstrap},
                       {"features_per_split", "all"}}},
                     {"master_seed", c.master_seed},
                     {"estimators", tags},
                     {"retrain_per_rep", c.retrain_per_rep},
                     {"assignment", c.assignment == Assignment::exact_split ? "exact_split" : "bernoulli"},
                     {"alpha", c.alpha},
                     {"hc_flavor", to_string(c.flavor)},
                     {"bound_sample_size", c.bound_sample_size}};
}

const EstimatorSummary& SimulationReport::at(EstimatorTag tag) const {
  for (const auto& s : estimators) {
    if (s.tag == tag) return s;
  }
  throw Error("report for '" + scenario + "' has no estimator " + std::string(to_string(tag)));
}

void to_json(nlohmann::json& j, const SimulationReport& r) {
  auto est = nlohmann::json::object();
  for (const auto& s : r.estimators) {
    est[std::string(to_string(s.tag))] = {{"mse", s.mse},
                                          {"bias", s.bias},
                                          {"variance", s.variance},
                                          {"variance_se", s.variance_se},
                                          {"mean_tau_hat", s.mean_tau_hat},
                                          {"mean_estimated_variance", s.mean_estimated_variance},
                                          {"coverage", s.coverage},
                                          {"rejection_rate", s.rejection_rate},
                                          {"n_ok", s.n_ok},
                                          {"failures", s.failures}};
  }
  j = nlohmann::json{{"scenario", r.scenario},
                     {"true_tau", r.true_tau},
                     {"n_reps", r.n_reps},
                     {"n_trial", r.n_trial},
                     {"estimators", est}};
  if (r.bound) {
    j["variance_bound"] = {{"sigma0", r.bound->sigma0},
                           {"sigma1", r.bound->sigma1},
                           {"rho0", r.bound->rho0},
                           {"rho1", r.bound->rho1},
                           {"bound", r.bound->variance_bound},
                           {"unadjusted", r.bound->unadjusted_variance}};
  }
}

std::vector<EstimatorSummary> summarize(std::span<const EstimatorTag> tags, std::span<const ReplicateResult> reps,
                                        double true_tau, double alpha) {
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<EstimatorSummary> out;
  for (std::size_t k = 0; k < tags.size(); ++k) {
    EstimatorSummary s;
    s.tag = tags[k];
    double sum = 0.0;
    for (const auto& r : reps) {
      if (std::isnan(r.tau_hat[k])) {
        ++s.failures;
        continue;
      }
      ++s.n_ok;
      sum += r.tau_hat[k];
    }
    if (s.n_ok == 0) {
      s.mean_tau_hat = s.bias = s.variance = s.variance_se = s.mse = kNaN;
      s.mean_estimated_variance = s.coverage = s.rejection_rate = kNaN;
      out.push_back(s);
      continue;
    }
    const double count = static_cast<double>(s.n_ok);
    s.mean_tau_hat = sum / count;
    double m2 = 0.0, m4 = 0.0, sq_err = 0.0, est_var = 0.0;
    std::size_t covered = 0, rejected = 0;
    for (const auto& r : reps) {
      const double t = r.tau_hat[k];
      if (std::isnan(t)) continue;
      const double se = r.std_error[k];
      const double d = t - s.mean_tau_hat;
      m2 += d * d;
      m4 += d * d * d * d;
      sq_err += (t - true_tau) * (t - true_tau);
      est_var += se * se;
      if (std::abs(t - true_tau) <= z * se) ++covered;
      if (se > 0.0 ? two_sided_p_value(t / se) < alpha : t != 0.0) ++rejected;
    }
    m2 /= count;
    m4 /= count;
    s.bias = s.mean_tau_hat - true_tau;
    s.variance = m2;
    s.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / count);
    s.mse = sq_err / count;
    s.mean_estimated_variance = est_var / count;
    s.coverage = static_cast<double>(covered) / count;
    s.rejection_rate = static_cast<double>(rejected) / count;
    out.push_back(s);
  }
  return out;
}

namespace {

using BatchScorer = std::function<Vector(const Matrix&)>;

SimulationReport run_with_batch_scores(const ScenarioSpec& spec, const SimConfig& config, const BatchScorer& batch,
                                       const ScoreFunction& score, std::size_t scenario_index) {
  spec.validate();
  config.validate();
  const InferenceOptions opts{config.alpha, config.flavor};

  std::vector<ReplicateResult> reps(config.n_reps);
  parallel_for(config.n_reps, config.workers, [&](std::size_t r) {
    RngStream rng(config.master_seed, {scenario_index, kTrialStream, r});
    const TrialDraw draw = sample_trial(spec, config.n_trial, config.pi1, rng, config.assignment);
    const Vector m = batch(draw.trial.covariates());
    reps[r] = run_estimators(draw.trial, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())),
                             config.estimators, opts);
  });

  SimulationReport report = finish_report(spec, config, spec.true_tau(), reps);
  report.bound = compute_bound(spec, config, score, scenario_index);
  return report;
}

}  // namespace

SimulationReport run_scenario_with_scores(const ScenarioSpec& spec, const SimConfig& config,
                                          const ScoreFunction& score, std::size_t scenario_index) {
  const BatchScorer batch = [&score](const Matrix& x) {
    Vector m(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
      m[i] = score(row);
    }
    return m;
  };
  return run_with_batch_scores(spec, config, batch, score, scenario_index);
}

SimulationReport run_scenario(const ScenarioSpec& spec, const SimConfig& config, std::size_t scenario_index) {
  spec.validate();
  config.validate();
  ForestHyperparams forest = config.forest;
  forest.seed = derive_seed(config.master_seed, {scenario_index, kForestStream});

  if (!config.retrain_per_rep) {
    RngStream hist_rng(config.master_seed, {scenario_index, kHistoricalStream});
    const HistoricalDataset hist = sample_historical(spec, config.n_hist, hist_rng);
    const FittedPrognosticModel model = train_forest(hist, forest, config.workers);
    return run_with_batch_scores(
        spec, config, [&model](const Matrix& x) { return model.predict(x); },
        [&model](std::span<const double> x) { return model.predict(x); }, scenario_index);
  }

  // Fresh historical draw and forest for every replicate. Parallelism is
  // across replicates, so each forest trains single-threaded.
  const InferenceOptions opts{config.alpha, config.flavor};
  std::vector<ReplicateResult> reps(config.n_reps);
  parallel_for(config.n_reps, config.workers, [&](std::size_t r) {
    RngStream hist_rng(config.master_seed, {scenario_index, kHistoricalStream, r + 1});
    const HistoricalDataset hist = sample_historical(spec, config.n_hist, hist_rng);
    ForestHyperparams rep_forest = forest;
    rep_forest.seed = derive_seed(config.master_seed, {scenario_index, kForestStream, r + 1});
    const FittedPrognosticModel model = train_forest(hist, rep_forest, 1);
    RngStream rng(config.master_seed, {scenario_index, kTrialStream, r});
    const TrialDraw draw = sample_trial(spec, config.n_trial, config.pi1, rng, config.assignment);
    const Vector m = model.predict(draw.trial.covariates());
    reps[r] = run_estimators(draw.trial, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())),
                             config.estimators, opts);
  });
  return finish_report(spec, config, spec.true_tau(), reps);
}

std::vector<SimulationReport> run_table(std::span<const ScenarioSpec> specs, const SimConfig& config) {
  std::vector<SimulationReport> reports;
  reports.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) reports.push_back(run_scenario(specs[i], config, i));
  return reports;
}

std::string render_table(const std::vector<SimulationReport>& reports) {
  std::ostringstream out;
  if (reports.empty()) return "";
  std::size_t name_width = 8;
  for (const auto& r : reports) name_width = std::max(name_width, r.scenario.size());
  std::vector<std::size_t> widths;
  out << std::left << std::setw(static_cast<int>(name_width)) << "Scenario";
  for (const auto& s : reports.front().estimators) {
    const std::string label(to_string(s.tag));
    widths.push_back(std::max<std::size_t>(label.size(), 8));
    out << "  " << std::right << std::setw(static_cast<int>(widths.back())) << label;
  }
  out << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(name_width)) << r.scenario;
    for (std::size_t k = 0; k < r.estimators.size() && k < widths.size(); ++k) {
      out << "  " << std::right << std::setw(static_cast<int>(widths[k])) << std::fixed << std::setprecision(4)
          << r.estimators[k].mse;
    }
    out << '\n';
  }
  return out.str();
}

void LinearGaussianDgp::validate() const {
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw ValidationError("dgp: pi1 must lie in (0, 1)");
  const auto p = sigma_x.rows();
  if (sigma_x.cols() != p || beta0.size() != p || beta1.size() != p) {
    throw ValidationError("dgp: inconsistent dimensions");
  }
  if (!(noise0 >= 0.0) || !(noise1 >= 0.0)) throw ValidationError("dgp: noise must be >= 0");
  Eigen::LLT<Matrix> llt(sigma_x);
  if (llt.info() != Eigen::Success) throw ValidationError("dgp: sigma_x must be positive definite");
}

PopulationParams LinearGaussianDgp::params() const {
  validate();
  PopulationParams p;
  p.pi1 = pi1;
  p.sigma_x = sigma_x;
  p.xi0 = sigma_x * beta0;
  p.xi1 = sigma_x * beta1;
  p.sigma0 = std::sqrt(beta0.dot(p.xi0) + noise0 * noise0);
  p.sigma1 = std::sqrt(beta1.dot(p.xi1) + noise1 * noise1);
  return p;
}

TrialDataset LinearGaussianDgp::sample(std::size_t n, RngStream& rng) const {
  const auto p = sigma_x.rows();
  const Matrix l = Eigen::LLT<Matrix>(sigma_x).matrixL();
  Matrix z(static_cast<Eigen::Index>(n), p);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) z(i, j) = rng.normal();
  }
  Matrix x = z * l.transpose();
  Vector y(x.rows());
  Vector w = assign(n, pi1, assignment, rng);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double e0 = noise0 * rng.normal();
    const double e1 = noise1 * rng.normal();
    y[i] = w[i] > 0.5 ? intercept1 + x.row(i).dot(beta1) + e1 : intercept0 + x.row(i).dot(beta0) + e0;
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
  return TrialDataset(std::move(x), std::move(w), std::move(y), std::move(names));
}

std::vector<VarianceCheck> mc_variance_check(const LinearGaussianDgp& dgp, std::span<const EstimatorTag> tags,
                                             std::size_t n, std::size_t reps, std::uint64_t seed,
                                             std::size_t workers) {
  if (reps < 2) throw ValidationError("mc_variance_check: need at least 2 replicates");
  const PopulationParams params = dgp.params();
  std::vector<double> formulas;
  for (auto tag : tags) {
    switch (tag) {
      case EstimatorTag::unadjusted:
        formulas.push_back(avar_unadjusted(params));
        break;
      case EstimatorTag::ancova1:
        formulas.push_back(avar_ancova1(params));
        break;
      case EstimatorTag::ancova2:
        formulas.push_back(avar_ancova2(params));
        break;
      default:
        throw ValidationError("mc_variance_check: no closed form for estimator " + std::string(to_string(tag)));
    }
  }

  std::vector<ReplicateResult> results(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    RngStream rng(seed, {r});
    ReplicateResult res;
    res.tau_hat.assign(tags.size(), kNaN);
    res.std_error.assign(tags.size(), kNaN);
    try {
      const TrialDataset trial = dgp.sample(n, rng);
      res = run_estimators(trial, {}, tags, {});
    } catch (const ValidationError&) {
    }
    results[r] = std::move(res);
  });

  const auto summaries = summarize(tags, results, dgp.true_tau(), 0.05);
  std::vector<VarianceCheck> out;
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const auto& s = summaries[k];
    VarianceCheck c;
    c.tag = tags[k];
    c.n = n;
    c.reps = reps;
    c.failures = s.failures;
    const double count = static_cast<double>(s.n_ok);
    // Unbiased variance and its standard error, scaled by n.
    c.empirical = static_cast<double>(n) * s.variance * count / (count - 1.0);
    c.empirical_se = static_cast<double>(n) * s.variance_se;
    c.formula = formulas[k];
    c.ratio = c.empirical / c.formula;
    c.ratio_se = c.empirical_se / c.formula;
    out.push_back(c);
  }
  return out;
}

VarianceCheck mc_variance_check(const LinearGaussianDgp& dgp, EstimatorTag tag, std::size_t n, std::size_t reps,
                                std::uint64_t seed, std::size_t workers) {
  const EstimatorTag tags[] = {tag};
  return mc_variance_check(dgp, tags, n, reps, seed, workers).front();
}

}  // namespace provar
