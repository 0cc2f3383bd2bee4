#include "provar/prognostic.hpp"

#include "provar/error.hpp"
#include "provar/ols.hpp"
#include "provar/parallel.hpp"
#include "provar/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace provar {
namespace {

using Order = std::vector<std::vector<std::uint32_t>>;

// Row indices sorted by (x(row, f), row) for each feature.
Order sort_rows_by_feature(const Matrix& x) {
  const auto n = static_cast<std::uint32_t>(x.rows());
  Order order(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0u);
    const double* col = x.col(f).data();
    std::stable_sort(o.begin(), o.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  return order;
}

class TreeGrower {
 public:
  TreeGrower(const Matrix& x, const Vector& y, std::span<const std::uint32_t> counts, const Order& row_order,
             std::size_t min_leaf)
      : p_(static_cast<std::size_t>(x.cols())), min_leaf_(std::max<std::size_t>(min_leaf, 1)) {
    const auto rows = static_cast<std::size_t>(x.rows());
    std::vector<std::uint32_t> start(rows + 1, 0);
    for (std::size_t r = 0; r < rows; ++r) start[r + 1] = start[r] + counts[r];
    m_ = start[rows];

    yv_.resize(m_);
    xv_.assign(p_, std::vector<double>(m_));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::uint32_t pos = start[r]; pos < start[r + 1]; ++pos) {
        yv_[pos] = y[static_cast<Eigen::Index>(r)];
        for (std::size_t f = 0; f < p_; ++f) xv_[f][pos] = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f));
      }
    }
    order_.assign(p_, {});
    for (std::size_t f = 0; f < p_; ++f) {
      auto& o = order_[f];
      o.reserve(m_);
      for (std::uint32_t r : row_order[f]) {
        for (std::uint32_t pos = start[r]; pos < start[r + 1]; ++pos) o.push_back(pos);
      }
    }
    scratch_.resize(m_);
    goes_left_.resize(m_);
  }

  RegressionTree grow() {
    std::vector<TreeNode> nodes(1);
    if (m_ == 0) return RegressionTree(std::move(nodes));
    struct Pending {
      std::size_t node, begin, end;
    };
    std::vector<Pending> stack{{0, 0, m_}};
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      const std::size_t n = cur.end - cur.begin;

      double sum = 0.0;
      double lo = yv_[order_.empty() ? cur.begin : order_[0][cur.begin]];
      double hi = lo;
      for (std::size_t i = cur.begin; i < cur.end; ++i) {
        const double v = yv_[order_.empty() ? i : order_[0][i]];
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double mean = sum / static_cast<double>(n);
      nodes[cur.node].value = mean;
      if (n < 2 * min_leaf_ || lo == hi || p_ == 0) continue;

      const Split split = best_split(cur.begin, cur.end, mean);
      if (split.feature < 0) continue;

      const std::size_t n_left = partition(cur.begin, cur.end, split);
      const auto left = static_cast<std::int32_t>(nodes.size());
      nodes[cur.node].feature = split.feature;
      nodes[cur.node].threshold = split.threshold;
      nodes[cur.node].left = left;
      nodes.emplace_back();
      nodes.emplace_back();
      stack.push_back({static_cast<std::size_t>(left) + 1, cur.begin + n_left, cur.end});
      stack.push_back({static_cast<std::size_t>(left), cur.begin, cur.begin + n_left});
    }
    return RegressionTree(std::move(nodes));
  }

 private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
  };

  Split best_split(std::size_t begin, std::size_t end, double mean) const {
    const std::size_t n = end - begin;
    Split best;
    double best_gain = -1.0;
    for (std::size_t f = 0; f < p_; ++f) {
      const auto& ord = order_[f];
      const double* xf = xv_[f].data();
      double left_sum = 0.0;
      std::size_t n_left = 0;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        const std::uint32_t pos = ord[i];
        left_sum += yv_[pos] - mean;
        ++n_left;
        const double a = xf[pos];
        const double b = xf[ord[i + 1]];
        if (!(a < b) || n_left < min_leaf_ || n - n_left < min_leaf_) continue;
        // Squared-error reduction with node-centred sums (S_R = -S_L).
        const double gain = left_sum * left_sum * static_cast<double>(n) /
                            (static_cast<double>(n_left) * static_cast<double>(n - n_left));
        if (gain > best_gain) {
          best_gain = gain;
          best.feature = static_cast<std::int32_t>(f);
          double t = a + 0.5 * (b - a);
          if (!(t < b)) t = a;
          best.threshold = t;
        }
      }
    }
    return best;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const Split& split) {
    const double* xs = xv_[static_cast<std::size_t>(split.feature)].data();
    std::size_t n_left = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t pos = order_[0][i];
      goes_left_[pos] = xs[pos] <= split.threshold;
      n_left += goes_left_[pos];
    }
    for (auto& ord : order_) {
      std::size_t l = begin;
      std::size_t r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t pos = ord[i];
        if (goes_left_[pos]) {
          ord[l++] = pos;
        } else {
          scratch_[r++] = pos;
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), ord.begin() + static_cast<std::ptrdiff_t>(l));
    }
    return n_left;
  }

  std::size_t p_;
  std::size_t min_leaf_;
  std::size_t m_ = 0;
  std::vector<double> yv_;
  std::vector<std::vector<double>> xv_;
  Order order_;
  std::vector<std::uint32_t> scratch_;
  std::vector<unsigned char> goes_left_;
};

void check_names_match(const std::vector<std::string>& model_names, const std::vector<std::string>& data_names) {
  if (model_names == data_names) return;
  std::vector<std::string> missing, extra;
  for (const auto& name : model_names) {
    if (std::find(data_names.begin(), data_names.end(), name) == data_names.end()) missing.push_back(name);
  }
  for (const auto& name : data_names) {
    if (std::find(model_names.begin(), model_names.end(), name) == model_names.end()) extra.push_back(name);
  }
  std::ostringstream msg;
  msg << "covariate schema mismatch";
  if (missing.empty() && extra.empty()) {
    msg << ": same columns in a different order (model expects";
    for (const auto& name : model_names) msg << ' ' << name;
    msg << ')';
  } else {
    if (!missing.empty()) {
      msg << "; missing:";
      for (const auto& name : missing) msg << ' ' << name;
    }
    if (!extra.empty()) {
      msg << "; extra:";
      for (const auto& name : extra) msg << ' ' << name;
    }
  }
  throw SchemaError(msg.str(), std::move(missing), std::move(extra));
}

}  // namespace

void ForestHyperparams::validate() const {
  if (n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ValidationError("regression tree needs at least one node");
  const auto size = static_cast<std::int32_t>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.feature >= 0 && (node.left <= 0 || node.left + 1 >= size)) {
      throw ValidationError("regression tree has an out-of-range child index");
    }
  }
}

double RegressionTree::predict(std::span<const double> x) const {
  const TreeNode* node = nodes_.data();
  while (node->feature >= 0) {
    const double v = x[static_cast<std::size_t>(node->feature)];
    node = nodes_.data() + (v <= node->threshold ? node->left : node->left + 1);
  }
  return node->value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

RegressionTree grow_regression_tree(const Matrix& x, const Vector& y, std::span<const std::size_t> sample,
                                    std::size_t min_leaf) {
  if (x.rows() != y.size()) throw ValidationError("grow_regression_tree: x and y lengths differ");
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(x.rows()), 0);
  for (std::size_t r : sample) {
    if (r >= counts.size()) throw ValidationError("grow_regression_tree: sample index out of range");
    ++counts[r];
  }
  const Order order = sort_rows_by_feature(x);
  return TreeGrower(x, y, counts, order, min_leaf).grow();
}

std::string_view to_string(LearnerTag tag) { return tag == LearnerTag::linear ? "linear" : "forest"; }

LearnerTag parse_learner_tag(std::string_view name) {
  if (name == "linear") return LearnerTag::linear;
  if (name == "forest") return LearnerTag::forest;
  throw ValidationError("unknown learner '" + std::string(name) + "' (expected linear or forest)");
}

FittedPrognosticModel FittedPrognosticModel::make_linear(std::vector<std::string> covariate_names,
                                                         Vector imputation_means, Vector coefficients) {
  if (static_cast<std::size_t>(imputation_means.size()) != covariate_names.size() ||
      static_cast<std::size_t>(coefficients.size()) != covariate_names.size() + 1) {
    throw ValidationError("linear model: coefficient or mean count does not match covariates");
  }
  FittedPrognosticModel m;
  m.learner_ = LearnerTag::linear;
  m.names_ = std::move(covariate_names);
  m.means_ = std::move(imputation_means);
  m.coefficients_ = std::move(coefficients);
  return m;
}

FittedPrognosticModel FittedPrognosticModel::make_forest(std::vector<std::string> covariate_names,
                                                         Vector imputation_means, std::vector<RegressionTree> trees,
                                                         ForestHyperparams params) {
  if (static_cast<std::size_t>(imputation_means.size()) != covariate_names.size()) {
    throw ValidationError("forest model: mean count does not match covariates");
  }
  if (trees.empty()) throw ValidationError("forest model needs at least one tree");
  const auto p = static_cast<std::int32_t>(covariate_names.size());
  for (const auto& tree : trees) {
    for (const auto& node : tree.nodes()) {
      if (node.feature >= p) throw ValidationError("forest model: split feature out of range");
    }
  }
  FittedPrognosticModel m;
  m.learner_ = LearnerTag::forest;
  m.names_ = std::move(covariate_names);
  m.means_ = std::move(imputation_means);
  m.trees_ = std::move(trees);
  m.params_ = params;
  return m;
}

double FittedPrognosticModel::predict(std::span<const double> x) const {
  if (x.size() != names_.size()) throw ValidationError("predict: wrong number of covariates");
  if (learner_ == LearnerTag::linear) {
    double v = coefficients_[0];
    for (std::size_t j = 0; j < x.size(); ++j) v += coefficients_[static_cast<Eigen::Index>(j + 1)] * x[j];
    return v;
  }
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

Vector FittedPrognosticModel::predict(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != names_.size()) throw ValidationError("predict: wrong number of covariates");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = x;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (std::isnan(rows(i, j))) rows(i, j) = means_[j];
    }
  }
  const auto p = static_cast<std::size_t>(rows.cols());
  const auto row_span = [&](Eigen::Index i) { return std::span<const double>(rows.data() + i * rows.cols(), p); };
  Vector out(rows.rows());
  if (learner_ == LearnerTag::linear) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out[i] = predict(row_span(i));
    return out;
  }
  // Tree-major traversal keeps one tree hot in cache; per-row sums still
  // accumulate in tree order, so results match the single-row path.
  out.setZero();
  for (const auto& tree : trees_) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out[i] += tree.predict(row_span(i));
  }
  out /= static_cast<double>(trees_.size());
  return out;
}

nlohmann::json FittedPrognosticModel::to_json() const {
  nlohmann::json j;
  j["version"] = kModelFormat;
  j["learner_tag"] = to_string(learner_);
  j["covariate_names"] = names_;
  j["imputation_means"] = std::vector<double>(means_.data(), means_.data() + means_.size());
  if (learner_ == LearnerTag::linear) {
    j["hyperparams"] = nlohmann::json::object();
    j["coefficients"] = std::vector<double>(coefficients_.data(), coefficients_.data() + coefficients_.size());
  } else {
    j["hyperparams"] = {{"n_trees", params_.n_trees},
                        {"min_leaf", params_.min_leaf},
                        {"features_per_split", "all"},
                        {"bootstrap", params_.bootstrap},
                        {"seed", params_.seed}};
    auto trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
      std::vector<std::int32_t> feature, left;
      std::vector<double> threshold, value;
      for (const auto& node : tree.nodes()) {
        feature.push_back(node.feature);
        left.push_back(node.left);
        threshold.push_back(node.threshold);
        value.push_back(node.value);
      }
      trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"value", value}});
    }
    j["trees"] = std::move(trees);
  }
  return j;
}

FittedPrognosticModel FittedPrognosticModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<std::string>() != kModelFormat) {
      throw ParseError("unsupported model version '" + j.at("version").get<std::string>() + "'");
    }
    auto names = j.at("covariate_names").get<std::vector<std::string>>();
    const auto means_raw = j.at("imputation_means").get<std::vector<double>>();
    Vector means = Eigen::Map<const Vector>(means_raw.data(), static_cast<Eigen::Index>(means_raw.size()));
    const LearnerTag tag = parse_learner_tag(j.at("learner_tag").get<std::string>());
    if (tag == LearnerTag::linear) {
      const auto c = j.at("coefficients").get<std::vector<double>>();
      return make_linear(std::move(names), std::move(means),
                         Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size())));
    }
    const auto& hp = j.at("hyperparams");
    ForestHyperparams params;
    params.n_trees = hp.at("n_trees").get<std::size_t>();
    params.min_leaf = hp.at("min_leaf").get<std::size_t>();
    params.bootstrap = hp.at("bootstrap").get<bool>();
    params.seed = hp.at("seed").get<std::uint64_t>();
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
      const auto left = t.at("left").get<std::vector<std::int32_t>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto value = t.at("value").get<std::vector<double>>();
      if (left.size() != feature.size() || threshold.size() != feature.size() || value.size() != feature.size()) {
        throw ParseError("model file: tree arrays have different lengths");
      }
      std::vector<TreeNode> nodes(feature.size());
      for (std::size_t k = 0; k < nodes.size(); ++k) nodes[k] = {feature[k], left[k], threshold[k], value[k]};
      trees.emplace_back(std::move(nodes));
    }
    return make_forest(std::move(names), std::move(means), std::move(trees), params);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

void FittedPrognosticModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out << to_json().dump() << '\n';
  if (!out) throw Error("failed writing model file '" + path + "'");
}

FittedPrognosticModel FittedPrognosticModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

FittedPrognosticModel train_linear(const HistoricalDataset& hist) {
  const auto p = static_cast<Eigen::Index>(hist.num_covariates());
  if (static_cast<Eigen::Index>(hist.size()) <= p + 1) {
    throw ValidationError("train_linear: need more historical rows than covariates + 1");
  }
  auto [x, means] = impute_column_means(hist.covariates());
  DesignMatrix design;
  design.columns.resize(x.rows(), p + 1);
  design.columns.col(0).setOnes();
  design.columns.rightCols(p) = x;
  design.layout.push_back({ColumnRole::intercept, 0});
  design.names.emplace_back("intercept");
  for (Eigen::Index j = 0; j < p; ++j) {
    design.layout.push_back({ColumnRole::covariate, static_cast<std::size_t>(j)});
    design.names.push_back(hist.covariate_names()[static_cast<std::size_t>(j)]);
  }
  const OlsFit fit = fit_ols(design, hist.outcome());
  return FittedPrognosticModel::make_linear(hist.covariate_names(), std::move(means), fit.coefficients);
}

FittedPrognosticModel train_forest(const HistoricalDataset& hist, const ForestHyperparams& params,
                                   std::size_t workers) {
  params.validate();
  auto [x, means] = impute_column_means(hist.covariates());
  const Vector& y = hist.outcome();
  const auto n = static_cast<std::size_t>(x.rows());
  const Order order = sort_rows_by_feature(x);

  std::vector<RegressionTree> trees(params.n_trees);
  parallel_for(params.n_trees, workers, [&](std::size_t t) {
    std::vector<std::uint32_t> counts(n, 1);
    if (params.bootstrap) {
      std::fill(counts.begin(), counts.end(), 0);
      RngStream rng(params.seed, {t});
      for (std::size_t k = 0; k < n; ++k) ++counts[rng.below(n)];
    }
    trees[t] = TreeGrower(x, y, counts, order, params.min_leaf).grow();
  });
  return FittedPrognosticModel::make_forest(hist.covariate_names(), std::move(means), std::move(trees), params);
}

Vector score_trial(const FittedPrognosticModel& model, const TrialDataset& trial) {
  check_names_match(model.covariate_names(), trial.covariate_names());
  return model.predict(trial.covariates());
}

}  // namespace provar
