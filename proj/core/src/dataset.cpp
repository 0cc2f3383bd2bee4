#include "provar/dataset.hpp"

#include "provar/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace provar {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool all_finite_or_nan(const Matrix& m) {
  return (m.array().isNaN() || m.array().isFinite()).all();
}

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Empty cell -> NaN (missing). Anything unparsable is a ParseError.
double parse_cell(const std::string& raw, std::size_t row, std::size_t col,
                  const std::string& col_name) {
  const std::string cell = trim(raw);
  if (cell.empty()) return kMissing;
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "row " << row << ", column " << col << " (" << col_name << "): cannot parse '" << cell
        << "' as a number";
    throw ParseError(msg.str(), row, col);
  }
  return value;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

RawTable read_table(std::istream& in) {
  RawTable table;
  std::string line;
  bool have_header = false;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
          static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
      }
      if (trim(line).empty()) continue;
      for (auto& name : split_record(line)) table.header.push_back(trim(name));
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    ++data_row;
    const auto fields = split_record(line);
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << "row " << data_row << ": expected " << table.header.size() << " fields, found "
          << fields.size();
      throw ParseError(msg.str(), data_row, 0);
    }
    std::vector<double> values(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      values[j] = parse_cell(fields[j], data_row, j + 1, table.header[j]);
    }
    table.rows.push_back(std::move(values));
  }
  if (!have_header) throw ParseError("missing header row");
  return table;
}

std::size_t find_column(const RawTable& table, const std::string& name) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) throw ParseError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - table.header.begin());
}

void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) return;
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

}  // namespace

TrialDataset::TrialDataset(Matrix covariates, Vector treatment, Vector outcome,
                           std::vector<std::string> covariate_names)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)),
      names_(std::move(covariate_names)) {
  const auto n = outcome_.size();
  if (treatment_.size() != n || covariates_.rows() != n) {
    throw ValidationError("trial dataset: covariate, treatment and outcome lengths differ");
  }
  if (static_cast<std::size_t>(covariates_.cols()) != names_.size()) {
    throw ValidationError("trial dataset: covariate name count does not match column count");
  }
  if (!outcome_.allFinite()) throw ValidationError("trial dataset: outcome must be finite");
  if (!all_finite_or_nan(covariates_)) {
    throw ValidationError("trial dataset: covariates must be finite or missing");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = treatment_[i];
    if (w != 0.0 && w != 1.0) {
      throw ValidationError("trial dataset: treatment entries must be exactly 0 or 1");
    }
    if (w == 1.0) ++n1_;
  }
  if (n1_ == static_cast<std::size_t>(n)) throw ValidationError("control arm empty");
  if (n1_ == 0) throw ValidationError("treatment arm empty");
  if (n < 4 || n1_ < 2 || static_cast<std::size_t>(n) - n1_ < 2) {
    throw ValidationError("trial dataset: need n >= 4 with at least 2 subjects per arm");
  }
}

bool TrialDataset::has_missing() const { return covariates_.array().isNaN().any(); }

std::pair<TrialDataset, Vector> TrialDataset::imputed(const std::optional<Vector>& means) const {
  auto [filled, used] = impute_column_means(covariates_, means);
  return {TrialDataset(std::move(filled), treatment_, outcome_, names_), std::move(used)};
}

TrialDataset TrialDataset::with_outcome(Vector outcome) const {
  return TrialDataset(covariates_, treatment_, std::move(outcome), names_);
}

TrialDataset TrialDataset::with_swapped_arms() const {
  Vector flipped = Vector::Ones(treatment_.size()) - treatment_;
  return TrialDataset(covariates_, std::move(flipped), outcome_, names_);
}

HistoricalDataset::HistoricalDataset(Matrix covariates, Vector outcome,
                                     std::vector<std::string> covariate_names)
    : covariates_(std::move(covariates)), outcome_(std::move(outcome)), names_(std::move(covariate_names)) {
  if (covariates_.rows() != outcome_.size()) {
    throw ValidationError("historical dataset: covariate and outcome lengths differ");
  }
  if (static_cast<std::size_t>(covariates_.cols()) != names_.size()) {
    throw ValidationError("historical dataset: covariate name count does not match column count");
  }
  if (outcome_.size() < 2) throw ValidationError("historical dataset: need at least 2 rows");
  if (!outcome_.allFinite()) throw ValidationError("historical dataset: outcome must be finite");
  if (!all_finite_or_nan(covariates_)) {
    throw ValidationError("historical dataset: covariates must be finite or missing");
  }
}

bool HistoricalDataset::has_missing() const { return covariates_.array().isNaN().any(); }

TrialDataset read_trial_csv(std::istream& in, const std::string& outcome_col,
                            const std::string& treatment_col, CsvLoadInfo* info) {
  const RawTable table = read_table(in);
  const std::size_t y_col = find_column(table, outcome_col);
  const std::size_t w_col = find_column(table, treatment_col);
  if (y_col == w_col) throw ParseError("outcome and treatment columns must differ");

  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == y_col || j == w_col) continue;
    x_cols.push_back(j);
    names.push_back(table.header[j]);
  }

  CsvLoadInfo local;
  local.rows_read = table.rows.size();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    if (std::isnan(r[y_col]) || std::isnan(r[w_col])) {
      ++local.rows_dropped;
      continue;
    }
    if (r[w_col] != 0.0 && r[w_col] != 1.0) {
      std::ostringstream msg;
      msg << "row " << (i + 1) << ": treatment value " << r[w_col] << " is not 0 or 1";
      throw ValidationError(msg.str());
    }
    keep.push_back(i);
  }

  const auto n = static_cast<Eigen::Index>(keep.size());
  Matrix x(n, static_cast<Eigen::Index>(x_cols.size()));
  Vector w(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[keep[static_cast<std::size_t>(i)]];
    y[i] = r[y_col];
    w[i] = r[w_col];
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(i, static_cast<Eigen::Index>(j)) = r[x_cols[j]];
      if (std::isnan(r[x_cols[j]])) ++local.missing_covariate_cells;
    }
  }
  if (info) *info = local;
  return TrialDataset(std::move(x), std::move(w), std::move(y), std::move(names));
}

TrialDataset load_trial_csv(const std::string& path, const std::string& outcome_col,
                            const std::string& treatment_col, CsvLoadInfo* info) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trial file '" + path + "'");
  return read_trial_csv(in, outcome_col, treatment_col, info);
}

HistoricalDataset read_historical_csv(std::istream& in, const std::string& outcome_col,
                                      CsvLoadInfo* info) {
  const RawTable table = read_table(in);
  const std::size_t y_col = find_column(table, outcome_col);
  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == y_col) continue;
    x_cols.push_back(j);
    names.push_back(table.header[j]);
  }
  CsvLoadInfo local;
  local.rows_read = table.rows.size();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (std::isnan(table.rows[i][y_col])) {
      ++local.rows_dropped;
    } else {
      keep.push_back(i);
    }
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  Matrix x(n, static_cast<Eigen::Index>(x_cols.size()));
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[keep[static_cast<std::size_t>(i)]];
    y[i] = r[y_col];
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(i, static_cast<Eigen::Index>(j)) = r[x_cols[j]];
      if (std::isnan(r[x_cols[j]])) ++local.missing_covariate_cells;
    }
  }
  if (info) *info = local;
  return HistoricalDataset(std::move(x), std::move(y), std::move(names));
}

HistoricalDataset load_historical_csv(const std::string& path, const std::string& outcome_col,
                                      CsvLoadInfo* info) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open historical file '" + path + "'");
  return read_historical_csv(in, outcome_col, info);
}

void write_trial_csv(std::ostream& out, const TrialDataset& trial, const std::string& outcome_col,
                     const std::string& treatment_col) {
  out << quote_if_needed(outcome_col) << ',' << quote_if_needed(treatment_col);
  for (const auto& name : trial.covariate_names()) out << ',' << quote_if_needed(name);
  out << '\n';
  const auto& x = trial.covariates();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    write_number(out, trial.outcome()[i]);
    out << ',';
    write_number(out, trial.treatment()[i]);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out << ',';
      write_number(out, x(i, j));
    }
    out << '\n';
  }
}

std::pair<Matrix, Vector> impute_column_means(const Matrix& matrix, const std::optional<Vector>& means) {
  if (means && means->size() != matrix.cols()) {
    throw ValidationError("imputation means length does not match column count");
  }
  Matrix filled = matrix;
  Vector used(matrix.cols());
  for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
    if (means) {
      used[j] = (*means)[j];
    } else {
      double sum = 0.0;
      Eigen::Index count = 0;
      for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        if (!std::isnan(matrix(i, j))) {
          sum += matrix(i, j);
          ++count;
        }
      }
      if (count == 0) {
        throw ValidationError("column " + std::to_string(j + 1) +
                              " has no observed values and no imputation mean was supplied");
      }
      used[j] = sum / static_cast<double>(count);
    }
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
      if (std::isnan(filled(i, j))) filled(i, j) = used[j];
    }
  }
  return {std::move(filled), std::move(used)};
}

std::size_t DesignMatrix::index_of(ColumnTag tag) const {
  const auto it = std::find(layout.begin(), layout.end(), tag);
  if (it == layout.end()) throw Error("design matrix has no such column");
  return static_cast<std::size_t>(it - layout.begin());
}

DesignMatrix build_design(const TrialDataset& trial, std::span<const double> scores,
                          bool include_covariates, bool include_interactions, Centering centering) {
  if (trial.has_missing()) throw ValidationError("build_design: trial covariates must be imputed first");
  const auto n = static_cast<Eigen::Index>(trial.size());
  const bool has_score = !scores.empty();
  if (has_score && scores.size() != trial.size()) {
    throw ValidationError("build_design: score vector length does not match trial size");
  }
  const auto p = include_covariates ? static_cast<Eigen::Index>(trial.num_covariates()) : 0;
  const Eigen::Index base = 1 + p + (has_score ? 1 : 0);
  const Eigen::Index q = 1 + base + (include_interactions ? base - 1 : 0);

  // Base columns (treatment, covariates, score) before centering.
  Matrix raw(n, base);
  raw.col(0) = trial.treatment();
  if (p > 0) raw.middleCols(1, p) = trial.covariates();
  if (has_score) raw.col(base - 1) = Eigen::Map<const Vector>(scores.data(), n);

  DesignMatrix d;
  d.centering_means = Vector::Zero(base);
  if (centering == Centering::empirical) {
    d.centering_means = raw.colwise().mean().transpose();
    raw.rowwise() -= d.centering_means.transpose();
  }

  d.columns.resize(n, q);
  d.columns.col(0).setOnes();
  d.columns.middleCols(1, base) = raw;
  d.layout.reserve(static_cast<std::size_t>(q));
  d.names.reserve(static_cast<std::size_t>(q));
  d.layout.push_back({ColumnRole::intercept, 0});
  d.names.emplace_back("intercept");
  d.layout.push_back({ColumnRole::treatment, 0});
  d.names.emplace_back("treatment");
  for (Eigen::Index j = 0; j < p; ++j) {
    d.layout.push_back({ColumnRole::covariate, static_cast<std::size_t>(j)});
    d.names.push_back(trial.covariate_names()[static_cast<std::size_t>(j)]);
  }
  if (has_score) {
    d.layout.push_back({ColumnRole::score, 0});
    d.names.emplace_back("score");
  }
  if (include_interactions) {
    for (Eigen::Index j = 1; j < base; ++j) {
      d.columns.col(base + j) = raw.col(0).cwiseProduct(raw.col(j));
      const auto& tag = d.layout[static_cast<std::size_t>(1 + j)];
      if (tag.role == ColumnRole::covariate) {
        d.layout.push_back({ColumnRole::treatment_x_covariate, tag.index});
      } else {
        d.layout.push_back({ColumnRole::treatment_x_score, 0});
      }
      d.names.push_back("treatment*" + d.names[static_cast<std::size_t>(1 + j)]);
    }
  }
  return d;
}

}  // namespace provar
