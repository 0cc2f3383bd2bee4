#include "cli.hpp"

#include "manifest.hpp"

#include "provar/error.hpp"
#include "provar/estimators.hpp"
#include "provar/parallel.hpp"
#include "provar/power.hpp"
#include "provar/prognostic.hpp"
#include "provar/simulation.hpp"
#include "provar/validation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

namespace provar::cli {
namespace {

using nlohmann::json;

#ifndef PROVAR_VERSION
#define PROVAR_VERSION "0.0.0"
#endif

class UsageError : public Error {
 public:
  using Error::Error;
};

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string out;
  std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  o.workers = default_workers();
  cmd->add_option("--seed", o.seed, "Master seed (drawn and printed when absent)");
  cmd->add_option("--workers", o.workers, "Worker threads (default: PROVAR_WORKERS or all cores)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--out", o.out, "Output path");
  cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "text"}))->capture_default_str();
}

struct Context {
  const std::vector<std::string>& args;
  std::ostream& out;
  std::ostream& err;
};

RunManifest start_manifest(const Context& ctx, const std::string& command, const CommonOptions& o) {
  RunManifest m;
  m.command = command;
  m.argv = ctx.args;
  m.tool_version = PROVAR_VERSION;
  m.timestamp = utc_timestamp();
  if (o.seed) {
    m.master_seed = *o.seed;
  } else {
    std::random_device rd;
    m.master_seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    m.seed_generated = true;
    ctx.err << "provar: using generated seed " << m.master_seed << '\n';
  }
  return m;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write '" + path + "'");
  f << text;
  if (!f) throw ParseError("failed writing '" + path + "'");
}

std::string render(const json& report, const std::string& text, const std::string& format) {
  return format == "text" ? text : report.dump(2) + "\n";
}

// Report to --out (manifest beside it) or stdout (manifest on stderr).
void emit(const Context& ctx, const CommonOptions& o, const RunManifest& m, const json& report,
          const std::string& text) {
  const std::string body = render(report, text, o.format);
  if (o.out.empty()) {
    ctx.out << body;
    ctx.err << "manifest: " << m.to_json().dump() << '\n';
    return;
  }
  write_file(o.out, body);
  write_file(o.out + ".manifest.json", m.to_json().dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<EstimatorTag> parse_tags(const std::string& list) {
  std::vector<EstimatorTag> tags;
  for (const auto& name : split_list(list)) tags.push_back(parse_estimator_tag(name));
  if (tags.empty()) throw UsageError("empty estimator list");
  return tags;
}

std::string fixed(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

// train ---------------------------------------------------------------------

struct TrainOptions {
  CommonOptions common;
  std::string data;
  std::string outcome;
  std::string learner = "forest";
  ForestHyperparams forest;
};

int cmd_train(const Context& ctx, const TrainOptions& o) {
  if (o.common.out.empty()) throw UsageError("train: --out <model.json> is required");
  RunManifest m = start_manifest(ctx, "train", o.common);
  m.inputs.push_back(digest_file(o.data));

  CsvLoadInfo info;
  const HistoricalDataset hist = load_historical_csv(o.data, o.outcome, &info);
  const LearnerTag learner = parse_learner_tag(o.learner);
  ForestHyperparams params = o.forest;
  params.seed = m.master_seed;

  const FittedPrognosticModel model =
      learner == LearnerTag::linear ? train_linear(hist) : train_forest(hist, params, o.common.workers);
  model.save(o.common.out);

  m.config = {{"data", o.data}, {"outcome", o.outcome}, {"learner", to_string(learner)}};
  if (learner == LearnerTag::forest) {
    m.config["n_trees"] = params.n_trees;
    m.config["min_leaf"] = params.min_leaf;
    m.config["bootstrap"] = params.bootstrap;
    m.config["features_per_split"] = "all";
  }

  const Vector fitted = model.predict(hist.covariates());
  const Vector y = hist.outcome();
  const double ss_res = (y - fitted).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;

  json report = {{"command", "train"},
                 {"model", o.common.out},
                 {"learner", to_string(learner)},
                 {"rows", hist.size()},
                 {"rows_dropped", info.rows_dropped},
                 {"missing_covariate_cells", info.missing_covariate_cells},
                 {"covariates", hist.covariate_names()},
                 {"in_sample_r2", r2}};
  std::ostringstream text;
  text << "trained " << to_string(learner) << " model on " << hist.size() << " rows ("
       << hist.num_covariates() << " covariates), in-sample R^2 " << fixed(r2, 4) << "\n"
       << "model written to " << o.common.out << "\n";

  const std::string body = render(report, text.str(), o.common.format);
  ctx.out << body;
  write_file(o.common.out + ".manifest.json", m.to_json().dump(2) + "\n");
  return kOk;
}

// analyze -------------------------------------------------------------------

struct AnalyzeOptions {
  CommonOptions common;
  std::string data;
  std::string outcome;
  std::string treatment;
  std::string model;
  std::string estimators;
  std::string interactions = "both";
  double alpha = 0.05;
  std::string hc = "HC0";
};

int cmd_analyze(const Context& ctx, const AnalyzeOptions& o) {
  RunManifest m = start_manifest(ctx, "analyze", o.common);
  m.inputs.push_back(digest_file(o.data));
  if (!o.model.empty()) m.inputs.push_back(digest_file(o.model));

  CsvLoadInfo info;
  const TrialDataset raw = load_trial_csv(o.data, o.outcome, o.treatment, &info);
  std::optional<FittedPrognosticModel> model;
  if (!o.model.empty()) model = FittedPrognosticModel::load(o.model);

  std::vector<EstimatorTag> tags;
  if (o.estimators.empty()) {
    tags = {EstimatorTag::unadjusted, EstimatorTag::ancova1, EstimatorTag::ancova2};
    if (model) {
      if (o.interactions != "off") tags.push_back(EstimatorTag::prognostic);
      if (o.interactions != "on") tags.push_back(EstimatorTag::prognostic_no_interaction);
    }
  } else {
    tags = parse_tags(o.estimators);
  }
  for (auto t : tags) {
    if (needs_score(t) && !model) throw UsageError(std::string(to_string(t)) + " needs --model");
  }

  Vector scores;
  std::optional<TrialDataset> trial;
  if (model) {
    scores = score_trial(*model, raw);
    trial = raw.imputed(model->imputation_means()).first;
  } else {
    trial = raw.imputed().first;
  }

  const InferenceOptions opts{o.alpha, parse_hc_flavor(o.hc)};
  const std::span<const double> score_span(scores.data(), static_cast<std::size_t>(scores.size()));
  json estimates = json::array();
  std::ostringstream text;
  text << std::left << std::setw(26) << "estimator" << std::right << std::setw(12) << "tau_hat" << std::setw(12)
       << "std_error" << std::setw(26) << "ci" << std::setw(12) << "p_value" << '\n';
  for (auto tag : tags) {
    text << std::left << std::setw(26) << to_string(tag) << std::right;
    try {
      const EffectEstimate e = estimate(tag, *trial, needs_score(tag) ? score_span : std::span<const double>{}, opts);
      estimates.push_back(e);
      text << std::setw(12) << fixed(e.tau_hat, 4) << std::setw(12) << fixed(e.std_error, 4) << std::setw(26)
           << ("[" + fixed(e.ci_low, 4) + ", " + fixed(e.ci_high, 4) + "]") << std::setw(12) << fixed(e.p_value, 4)
           << '\n';
    } catch (const SingularDesignError& ex) {
      estimates.push_back({{"estimator_tag", to_string(tag)}, {"error", ex.what()}, {"columns", ex.columns()}});
      text << "  error: " << ex.what() << '\n';
    }
  }

  m.config = {{"data", o.data},
              {"outcome", o.outcome},
              {"treatment", o.treatment},
              {"model", o.model},
              {"estimators", [&] {
                 std::vector<std::string> names;
                 for (auto t : tags) names.emplace_back(to_string(t));
                 return names;
               }()},
              {"alpha", o.alpha},
              {"hc_flavor", to_string(opts.flavor)}};

  json report = {{"command", "analyze"},
                 {"n", trial->size()},
                 {"n0", trial->n_control()},
                 {"n1", trial->n_treated()},
                 {"rows_dropped", info.rows_dropped},
                 {"missing_covariate_cells", info.missing_covariate_cells},
                 {"estimates", estimates}};
  emit(ctx, o.common, m, report, text.str());
  return kOk;
}

// power ---------------------------------------------------------------------

struct PowerOptions {
  CommonOptions common;
  double tau = 0.0;
  std::optional<double> sigma, sigma0, sigma1, rho, rho0, rho1;
  double pi1 = 0.5;
  double alpha = 0.05;
  double target_power = 0.8;
  std::optional<std::uint64_t> n;
};

int cmd_power(const Context& ctx, const PowerOptions& o) {
  RunManifest m = start_manifest(ctx, "power", o.common);
  PowerSpec spec;
  spec.tau = o.tau;
  spec.sigma0 = o.sigma0.value_or(o.sigma.value_or(1.0));
  spec.sigma1 = o.sigma1.value_or(o.sigma.value_or(1.0));
  spec.rho0 = o.rho0.value_or(o.rho.value_or(0.0));
  spec.rho1 = o.rho1.value_or(o.rho.value_or(0.0));
  spec.pi1 = o.pi1;
  spec.alpha = o.alpha;
  spec.target_power = o.target_power;
  spec.validate();

  const std::uint64_t n = o.n ? *o.n : required_n(spec);
  if (n == 0) throw UsageError("power: --n must be positive");
  const ArmSizes arms = arm_sizes(spec, n);
  const double power = power_at_n(spec, n);
  const double bound = variance_bound(spec, n);

  json spec_json = {{"tau", spec.tau},     {"sigma0", spec.sigma0}, {"sigma1", spec.sigma1},
                    {"rho0", spec.rho0},   {"rho1", spec.rho1},     {"pi1", spec.pi1},
                    {"alpha", spec.alpha}, {"target_power", spec.target_power}};
  m.config = spec_json;
  if (o.n) m.config["n"] = *o.n;

  json report = {{"command", "power"},
                 {"mode", o.n ? "power_at_n" : "required_n"},
                 {"spec", spec_json},
                 {"n", n},
                 {"n0", arms.n0},
                 {"n1", arms.n1},
                 {"variance_bound", bound},
                 {"power", power}};
  std::ostringstream text;
  if (o.n) {
    text << "power at n = " << n << ": " << fixed(power, 4) << '\n';
  } else {
    text << "required n for power " << spec.target_power << ": " << n << " (achieved " << fixed(power, 4) << ")\n";
  }
  text << "arms: n0 = " << arms.n0 << ", n1 = " << arms.n1 << "; variance bound " << bound << '\n';
  emit(ctx, o.common, m, report, text.str());
  return kOk;
}

// simulate ------------------------------------------------------------------

struct SimulateOptions {
  CommonOptions common;
  std::string builtin;
  std::string scenarios;
  std::optional<std::size_t> reps, trees, n_hist, n_trial;
  std::optional<double> pi1;
  bool full = false;
  bool retrain = false;
  std::string estimators;
  double alpha = 0.05;
  std::string hc = "HC0";
  std::string assignment = "exact_split";
};

std::vector<ScenarioSpec> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  if (j.is_object() && j.contains("scenarios")) j = j.at("scenarios");
  if (j.is_object()) j = json::array({j});
  std::vector<ScenarioSpec> specs;
  try {
    for (const auto& s : j) specs.push_back(s.get<ScenarioSpec>());
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  if (specs.empty()) throw ParseError("'" + path + "' holds no scenarios");
  return specs;
}

int cmd_simulate(const Context& ctx, const SimulateOptions& o) {
  RunManifest m = start_manifest(ctx, "simulate", o.common);
  if (!o.builtin.empty() && !o.scenarios.empty()) throw UsageError("simulate: use --builtin or --scenarios, not both");
  if (!o.builtin.empty() && o.builtin != "table1") throw UsageError("simulate: unknown builtin '" + o.builtin + "'");

  std::vector<ScenarioSpec> specs;
  if (!o.scenarios.empty()) {
    m.inputs.push_back(digest_file(o.scenarios));
    specs = load_scenarios(o.scenarios);
  } else {
    specs = table1();
  }

  SimConfig config = o.full ? SimConfig::full() : SimConfig::desk();
  if (o.reps) config.n_reps = *o.reps;
  if (o.trees) config.forest.n_trees = *o.trees;
  if (o.n_hist) config.n_hist = *o.n_hist;
  if (o.n_trial) config.n_trial = *o.n_trial;
  if (o.pi1) config.pi1 = *o.pi1;
  if (!o.estimators.empty()) config.estimators = parse_tags(o.estimators);
  config.retrain_per_rep = o.retrain;
  config.alpha = o.alpha;
  config.flavor = parse_hc_flavor(o.hc);
  config.assignment = o.assignment == "bernoulli" ? Assignment::bernoulli : Assignment::exact_split;
  config.master_seed = m.master_seed;
  config.workers = o.common.workers;
  config.validate();

  const auto reports = run_table(specs, config);

  m.config = config;
  m.config["scenarios"] = specs;
  json report = {{"command", "simulate"}, {"config", config}, {"scenarios", specs}, {"reports", reports}};
  std::ostringstream text;
  text << "MSE over " << config.n_reps << " replicates (n = " << config.n_trial << ")\n" << render_table(reports);
  for (const auto& r : reports) {
    if (r.bound) {
      text << r.scenario << ": variance bound " << fixed(r.bound->variance_bound, 5) << ", unadjusted "
           << fixed(r.bound->unadjusted_variance, 5) << '\n';
    }
  }

  if (o.common.out.empty()) {
    ctx.out << render(report, text.str(), o.common.format);
    ctx.err << "manifest: " << m.to_json().dump() << '\n';
    return kOk;
  }
  std::filesystem::create_directories(o.common.out);
  const std::filesystem::path dir(o.common.out);
  write_file((dir / "report.json").string(), report.dump(2) + "\n");
  write_file((dir / "table.txt").string(), text.str());
  write_file((dir / "manifest.json").string(), m.to_json().dump(2) + "\n");
  ctx.out << render(report, text.str(), o.common.format);
  return kOk;
}

// validate ------------------------------------------------------------------

struct ValidateOptions {
  CommonOptions common;
  std::string suite = "all";
  std::optional<std::size_t> reps;
  std::optional<std::size_t> trees;
};

int cmd_validate(const Context& ctx, const ValidateOptions& o) {
  RunManifest m = start_manifest(ctx, "validate", o.common);
  ValidationConfig config;
  config.seed = m.master_seed;
  config.workers = o.common.workers;
  if (o.reps) config.sim.n_reps = *o.reps;
  if (o.trees) config.sim.forest.n_trees = *o.trees;

  std::vector<ValidationSuite> suites;
  if (o.suite == "all") {
    suites = {ValidationSuite::formulas, ValidationSuite::coverage, ValidationSuite::efficiency};
  } else {
    suites = {parse_validation_suite(o.suite)};
  }

  json results = json::array();
  std::string text;
  bool ok = true;
  for (auto s : suites) {
    const SuiteResult r = run_suite(s, config);
    ok = ok && r.passed();
    results.push_back(r);
    text += render_suite(r);
  }
  m.config = {{"suite", o.suite}, {"coverage_reps", config.sim.n_reps}, {"coverage_trees", config.sim.forest.n_trees}};
  json report = {{"command", "validate"}, {"passed", ok}, {"suites", results}};
  emit(ctx, o.common, m, report, text);
  return ok ? kOk : kValidationFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prognostic-score covariate adjustment for randomized trials", "provar"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PROVAR_VERSION);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train a prognostic model on historical controls");
  add_common(t, train.common);
  t->add_option("--data", train.data, "Historical CSV")->required();
  t->add_option("--outcome", train.outcome, "Outcome column")->required();
  t->add_option("--learner", train.learner, "linear or forest")->capture_default_str();
  t->add_option("--trees", train.forest.n_trees, "Number of trees")->capture_default_str();
  t->add_option("--min-leaf", train.forest.min_leaf, "Minimum samples per leaf")->capture_default_str();
  bool no_bootstrap = false;
  t->add_flag("--no-bootstrap", no_bootstrap, "Grow every tree on the full sample");

  AnalyzeOptions analyze;
  auto* a = app.add_subcommand("analyze", "Estimate the treatment effect in a trial");
  add_common(a, analyze.common);
  a->add_option("--data", analyze.data, "Trial CSV")->required();
  a->add_option("--outcome", analyze.outcome, "Outcome column")->required();
  a->add_option("--treatment", analyze.treatment, "Treatment column (0/1)")->required();
  a->add_option("--model", analyze.model, "Prognostic model file");
  a->add_option("--estimators", analyze.estimators, "Comma-separated estimator tags");
  a->add_option("--interactions", analyze.interactions, "Prognostic variants: on, off or both")
      ->check(CLI::IsMember({"on", "off", "both"}))
      ->capture_default_str();
  a->add_option("--alpha", analyze.alpha, "Significance level")->capture_default_str();
  a->add_option("--hc", analyze.hc, "Sandwich flavor (HC0 or HC1)")->capture_default_str();

  PowerOptions power;
  auto* p = app.add_subcommand("power", "Power or required sample size for the prognostic estimator");
  add_common(p, power.common);
  p->add_option("--tau", power.tau, "Effect size")->required();
  p->add_option("--sigma", power.sigma, "Outcome SD in both arms");
  p->add_option("--sigma0", power.sigma0, "Control outcome SD");
  p->add_option("--sigma1", power.sigma1, "Treated outcome SD");
  p->add_option("--rho", power.rho, "Score-outcome correlation in both arms");
  p->add_option("--rho0", power.rho0, "Score-outcome correlation, control");
  p->add_option("--rho1", power.rho1, "Score-outcome correlation, treated");
  p->add_option("--pi1", power.pi1, "Treated fraction")->capture_default_str();
  p->add_option("--alpha", power.alpha, "Significance level")->capture_default_str();
  p->add_option("--target-power", power.target_power, "Target power")->capture_default_str();
  p->add_option("--n", power.n, "Total sample size (power at n instead of required n)");

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Monte Carlo comparison of estimators");
  add_common(s, sim.common);
  s->add_option("--builtin", sim.builtin, "Built-in scenario set (table1)");
  s->add_option("--scenarios", sim.scenarios, "Scenario JSON file");
  s->add_option("--reps", sim.reps, "Replicates per scenario");
  s->add_option("--trees", sim.trees, "Trees per forest");
  s->add_option("--n-hist", sim.n_hist, "Historical sample size");
  s->add_option("--n-trial", sim.n_trial, "Trial sample size");
  s->add_option("--pi1", sim.pi1, "Treated fraction");
  s->add_flag("--full", sim.full, "10000 replicates, 1000 trees, 10000 historical rows");
  s->add_flag("--retrain-per-rep", sim.retrain, "Redraw history and retrain the forest every replicate");
  s->add_option("--estimators", sim.estimators, "Comma-separated estimator tags");
  s->add_option("--alpha", sim.alpha, "Significance level")->capture_default_str();
  s->add_option("--hc", sim.hc, "Sandwich flavor (HC0 or HC1)")->capture_default_str();
  s->add_option("--assignment", sim.assignment, "exact_split or bernoulli")
      ->check(CLI::IsMember({"exact_split", "bernoulli"}))
      ->capture_default_str();

  ValidateOptions val;
  auto* v = app.add_subcommand("validate", "Run a statistical validation suite");
  add_common(v, val.common);
  v->add_option("--suite", val.suite, "formulas, coverage, efficiency or all")
      ->check(CLI::IsMember({"formulas", "coverage", "efficiency", "all"}))
      ->capture_default_str();
  v->add_option("--reps", val.reps, "Replicates for the coverage suite");
  v->add_option("--trees", val.trees, "Trees for the coverage suite");

  std::vector<const char*> argv;
  for (const auto& arg : args) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  const Context ctx{args, out, err};
  try {
    if (t->parsed()) {
      train.forest.bootstrap = !no_bootstrap;
      return cmd_train(ctx, train);
    }
    if (a->parsed()) return cmd_analyze(ctx, analyze);
    if (p->parsed()) return cmd_power(ctx, power);
    if (s->parsed()) return cmd_simulate(ctx, sim);
    if (v->parsed()) return cmd_validate(ctx, val);
  } catch (const ParseError& e) {
    err << "provar: input error: " << e.what() << '\n';
    return kInputError;
  } catch (const SchemaError& e) {
    err << "provar: schema error: " << e.what() << '\n';
    return kInputError;
  } catch (const UsageError& e) {
    err << "provar: " << e.what() << '\n';
    return kInputError;
  } catch (const ValidationError& e) {
    err << "provar: validation failure: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const SingularDesignError& e) {
    err << "provar: validation failure: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "provar: error: " << e.what() << '\n';
    return kInternalError;
  }
  return kInputError;
}

}  // namespace provar::cli
