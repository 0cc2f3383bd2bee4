#include "provar/dataset.hpp"
#include "provar/error.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace provar;

TEST_SUITE("dataset") {

TEST_CASE("reads a six-row trial") {
  std::istringstream in(
      "y,w,age,bmi\n"
      "1.5,1,30,22\n"
      "2.0,1,41,25.5\n"
      "0.1,1,35,21\n"
      "0.7,0,50,30\n"
      "1.1,0,28,19\n"
      "-0.2,0,61,27\n");
  CsvLoadInfo info;
  const TrialDataset t = read_trial_csv(in, "y", "w", &info);
  CHECK(t.size() == 6);
  CHECK(t.num_covariates() == 2);
  CHECK(t.n_treated() == 3);
  CHECK(t.n_control() == 3);
  CHECK(t.covariate_names() == std::vector<std::string>{"age", "bmi"});
  CHECK(t.covariates()(1, 1) == 25.5);
  CHECK(t.outcome()[5] == -0.2);
  CHECK(info.rows_read == 6);
  CHECK(info.rows_dropped == 0);
}

TEST_CASE("all treated is rejected") {
  std::istringstream in("y,w,x\n1,1,0\n2,1,1\n3,1,2\n4,1,3\n");
  CHECK_THROWS_WITH_AS(read_trial_csv(in, "y", "w"), "control arm empty", ValidationError);
}

TEST_CASE("no treated subjects is rejected") {
  std::istringstream in("y,w,x\n1,0,0\n2,0,1\n3,0,2\n4,0,3\n");
  CHECK_THROWS_WITH_AS(read_trial_csv(in, "y", "w"), "treatment arm empty", ValidationError);
}

TEST_CASE("treatment must be binary") {
  std::istringstream in("y,w,x\n1,0,0\n2,2,1\n3,1,2\n4,0,3\n");
  CHECK_THROWS_AS(read_trial_csv(in, "y", "w"), ValidationError);
}

TEST_CASE("missing covariate cell is kept as missing and imputable") {
  std::istringstream in("y,w,x1,x2\n1,1,1,5\n2,1,,6\n3,0,3,7\n4,0,5,8\n");
  CsvLoadInfo info;
  const TrialDataset t = read_trial_csv(in, "y", "w", &info);
  CHECK(t.has_missing());
  CHECK(std::isnan(t.covariates()(1, 0)));
  CHECK(info.missing_covariate_cells == 1);
  const auto [filled, means] = t.imputed();
  CHECK_FALSE(filled.has_missing());
  CHECK(filled.covariates()(1, 0) == doctest::Approx(3.0));
  CHECK(means[0] == doctest::Approx(3.0));
  CHECK(means[1] == doctest::Approx(6.5));
}

TEST_CASE("rows with a missing outcome are dropped and counted") {
  std::istringstream in("y,w,x\n1,1,0\n,1,1\n3,1,2\n4,0,3\n5,0,4\n");
  CsvLoadInfo info;
  const TrialDataset t = read_trial_csv(in, "y", "w", &info);
  CHECK(t.size() == 4);
  CHECK(info.rows_dropped == 1);
}

TEST_CASE("bad numeric cell reports its row and column") {
  std::istringstream in("y,w,x\n1,1,0\n2,1,abc\n3,0,2\n4,0,3\n");
  try {
    read_trial_csv(in, "y", "w");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(e.column() == 3);
  }
}

TEST_CASE("missing column is a parse error") {
  std::istringstream in("y,w,x\n1,1,0\n");
  CHECK_THROWS_AS(read_trial_csv(in, "outcome", "w"), ParseError);
}

TEST_CASE("quoted fields, whitespace and BOM") {
  std::istringstream in("\xEF\xBB\xBF\"y\", w ,\"x, cm\"\n 1 ,1,\"2\"\n2,1,3\n3,0,4\n4,0,5\n");
  const TrialDataset t = read_trial_csv(in, "y", "w");
  CHECK(t.covariate_names() == std::vector<std::string>{"x, cm"});
  CHECK(t.covariates()(0, 0) == 2.0);
}

TEST_CASE("csv round trip is exact") {
  Matrix x(4, 2);
  x << 0.1, 1.0 / 3.0, -2.5e-7, 1e10, 3.0, -4.0, 5.5, 6.25;
  Vector w(4), y(4);
  w << 1, 0, 1, 0;
  y << 0.3, -1.0 / 7.0, 2.0, 1e-300;
  const TrialDataset t(x, w, y, {"a", "b"});
  std::stringstream buf;
  write_trial_csv(buf, t, "y", "w");
  const TrialDataset back = read_trial_csv(buf, "y", "w");
  CHECK(back.covariates() == t.covariates());
  CHECK(back.outcome() == t.outcome());
  CHECK(back.treatment() == t.treatment());
}

TEST_CASE("historical csv") {
  std::istringstream in("y,a,b\n1,2,3\n4,,6\n");
  const HistoricalDataset h = read_historical_csv(in, "y");
  CHECK(h.size() == 2);
  CHECK(h.has_missing());
}

TEST_CASE("impute_column_means") {
  const double nan = std::nan("");
  SUBCASE("observed mean") {
    Matrix m(3, 1);
    m << 1, nan, 3;
    const auto [out, means] = impute_column_means(m);
    CHECK(out(1, 0) == 2.0);
    CHECK(means[0] == 2.0);
  }
  SUBCASE("supplied mean") {
    Matrix m(1, 1);
    m << nan;
    const auto [out, means] = impute_column_means(m, Vector::Constant(1, 7.0));
    CHECK(out(0, 0) == 7.0);
    CHECK(means[0] == 7.0);
  }
  SUBCASE("nothing observed") {
    Matrix m(2, 1);
    m << nan, nan;
    CHECK_THROWS_AS(impute_column_means(m), ValidationError);
  }
}

TEST_CASE("design column counts") {
  Matrix x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 9;
  Vector w(4), y(4);
  w << 1, 0, 1, 0;
  y << 1, 2, 3, 4;
  const TrialDataset t(x, w, y, {"a", "b"});
  CHECK(build_design(t, {}, false, false).cols() == 2);
  const std::vector<double> m{0.5, -1.0, 2.0, 0.0};
  const DesignMatrix d = build_design(t, m, true, true);
  CHECK(d.cols() == 8);
  CHECK(d.layout[0].role == ColumnRole::intercept);
  CHECK(d.layout[1].role == ColumnRole::treatment);
  CHECK(d.layout[7].role == ColumnRole::treatment_x_score);
}

TEST_CASE("hand centering") {
  Matrix x(4, 1);
  x << 2, 4, 2, 4;
  Vector w(4), y(4);
  w << 1, 0, 1, 0;
  y << 0, 0, 0, 1;
  const TrialDataset t(x, w, y, {"x"});
  const DesignMatrix d = build_design(t, {}, true, true);
  const auto& z = d.columns;
  for (int i = 0; i < 4; ++i) CHECK(z(i, 0) == 1.0);
  CHECK(z(0, 1) == 0.5);
  CHECK(z(1, 1) == -0.5);
  CHECK(z(0, 2) == -1.0);
  CHECK(z(1, 2) == 1.0);
  CHECK(z(0, 3) == -0.5);
  CHECK(z(1, 3) == -0.5);
  CHECK(d.centering_means[0] == 0.5);
  CHECK(d.centering_means[1] == 3.0);
}

TEST_CASE("uncentered design keeps raw columns") {
  Matrix x(4, 1);
  x << 2, 4, 2, 4;
  Vector w(4), y(4);
  w << 1, 0, 1, 0;
  y.setZero();
  const TrialDataset t(x, w, y, {"x"});
  const DesignMatrix d = build_design(t, {}, true, false, Centering::none);
  CHECK(d.columns(0, 1) == 1.0);
  CHECK(d.columns(1, 2) == 4.0);
}

TEST_CASE("swapped arms and replaced outcome") {
  Matrix x = Matrix::Zero(4, 1);
  Vector w(4), y(4);
  w << 1, 1, 0, 0;
  y << 1, 2, 3, 4;
  const TrialDataset t(x, w, y, {"x"});
  const TrialDataset s = t.with_swapped_arms();
  CHECK(s.treatment()[0] == 0.0);
  CHECK(s.treatment()[3] == 1.0);
  const TrialDataset o = t.with_outcome(Vector::Constant(4, 9.0));
  CHECK(o.outcome()[2] == 9.0);
}

}
