#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

#include "varscore/errors.hpp"
#include "varscore/fitness.hpp"
#include "varscore/metrics.hpp"

using namespace varscore;

namespace {

// Z-scoring reimplemented for the oracle path.
Eigen::MatrixXd zscore_columns(Eigen::MatrixXd m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    m.col(c).array() -= m.col(c).mean();
    m.col(c) /= std::sqrt(m.col(c).squaredNorm() / static_cast<double>(m.rows()));
  }
  return m;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

void check_stationarity(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const RidgeModel& model) {
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::VectorXd rhs = xc.transpose() * yc;
  const double residual =
      (xc.transpose() * (xc * model.weights) + model.lambda * model.weights - rhs).norm();
  CHECK(residual <= 1e-8 * rhs.norm() + 1e-12);
}

// A hand-rolled score table plus the assay measuring fitness = score exactly.
struct SufficiencyFixture {
  ScoreMatrix matrix;
  DmsAssay assay;
};

SufficiencyFixture make_sufficient(int length, std::uint64_t seed) {
  SufficiencyFixture f;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  f.matrix.scores = Eigen::MatrixXd::Zero(length, 20);
  for (int p = 0; p < length; ++p) {
    f.matrix.positions.push_back(p + 1);
    f.matrix.wildtype.push_back(AminoAcid::from_index(p % 20));
    for (int a = 0; a < 20; ++a) f.matrix.scores(p, a) = u(rng);
  }
  f.assay.id = "sufficiency";
  f.assay.wt_reference = 0.0;
  for (int p = 0; p < length; ++p) f.assay.sequence.push_back(AminoAcid::from_index(p % 20));
  for (int p = 0; p < length; ++p) {
    for (int a = 0; a < 20; ++a) {
      if (a == p % 20) continue;
      DmsRecord rec;
      rec.position = p + 1;
      rec.wildtype = AminoAcid::from_index(p % 20);
      rec.mutant = AminoAcid::from_index(a);
      rec.fitness = f.matrix.scores(p, a);
      f.assay.records.push_back(rec);
    }
  }
  return f;
}

double aggregate_mean(const LearningCurveResult& result, int size, const std::string& metric) {
  for (const auto& a : result.aggregates) {
    if (a.size == size && a.metric == metric) return a.mean;
  }
  FAIL("missing aggregate ", metric, " at size ", size);
  return 0.0;
}

}  // namespace

TEST_CASE("index reduction rejects bad shapes and constant columns") {
  CHECK_THROWS_AS(reduce_aaindex(Eigen::MatrixXd::Random(19, 25)), DimensionalityError);
  CHECK_THROWS_AS(reduce_aaindex(Eigen::MatrixXd::Random(20, 18)), DimensionalityError);
  Eigen::MatrixXd with_constant = random_matrix(20, 22, 1);
  with_constant.col(5).setConstant(3.25);
  CHECK_THROWS_AS(reduce_aaindex(with_constant), DimensionalityError);
  Eigen::MatrixXd all_missing = random_matrix(20, 20, 2);
  all_missing.col(3).setConstant(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(reduce_aaindex(all_missing), DimensionalityError);
}

TEST_CASE("index reduction orders components by non-increasing variance") {
  const auto scores = reduce_aaindex(random_matrix(20, 30, 3));
  REQUIRE(scores.rows() == 20);
  REQUIRE(scores.cols() == 19);
  for (int k = 1; k < 19; ++k) {
    CHECK(scores.col(k).squaredNorm() <= scores.col(k - 1).squaredNorm() + 1e-10);
  }
  // Deterministic sign: each component's largest-magnitude coordinate is
  // positive (zero counts as non-negative).
  for (int k = 0; k < 19; ++k) {
    Eigen::Index arg = 0;
    scores.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(scores(arg, k) >= 0.0);
  }
}

TEST_CASE("index reduction agrees with a singular-value-decomposition oracle") {
  const Eigen::MatrixXd raw = random_matrix(20, 40, 4);
  const auto scores = reduce_aaindex(raw);
  const Eigen::MatrixXd z = zscore_columns(raw);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);

  // Per-component captured variance matches the squared singular values.
  for (int k = 0; k < 19; ++k) {
    const double mine = scores.col(k).squaredNorm();
    const double oracle = svd.singularValues()[k] * svd.singularValues()[k];
    CHECK(mine == doctest::Approx(oracle).epsilon(1e-8));
  }

  // Top-19 reconstruction error: centered rows leave rank at most 19, so both
  // residuals are the 20th singular value, near zero.
  const double oracle_residual_sq =
      svd.singularValues()[19] * svd.singularValues()[19];
  double kept = 0.0;
  for (int k = 0; k < 19; ++k) kept += scores.col(k).squaredNorm();
  const double my_residual_sq = z.squaredNorm() - kept;
  CHECK(std::abs(my_residual_sq - oracle_residual_sq) < 1e-8);
  CHECK(my_residual_sq < 1e-8);

  // The projection preserves the row geometry exactly (no rank was lost).
  CHECK((scores * scores.transpose() - z * z.transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("index reduction of orthonormal centered data preserves its geometry") {
  // Centered orthonormal columns: QR of a column-centered random table.
  Eigen::MatrixXd base = random_matrix(20, 19, 5);
  base.rowwise() -= base.colwise().mean().eval();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(base);
  const Eigen::MatrixXd q = Eigen::MatrixXd(qr.householderQ()).leftCols(19);

  const auto scores = reduce_aaindex(q);
  // Z-scoring scales every unit column by sqrt(20); with a fully degenerate
  // spectrum the component basis is arbitrary, so compare Gram matrices.
  const Eigen::MatrixXd z = zscore_columns(q);
  CHECK((scores * scores.transpose() - z * z.transpose()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("missing index entries impute to the column mean") {
  Eigen::MatrixXd raw = random_matrix(20, 24, 6);
  Eigen::MatrixXd filled = raw;
  double mean = 0.0;
  for (int r = 0; r < 20; ++r) {
    if (r != 7) mean += raw(r, 2);
  }
  mean /= 19.0;
  raw(7, 2) = std::numeric_limits<double>::quiet_NaN();
  filled(7, 2) = mean;
  CHECK((reduce_aaindex(raw) - reduce_aaindex(filled)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("index tables parse from CSV") {
  std::string csv = "aa,hydro,bulk,charge\n";
  for (int i = 0; i < 20; ++i) {
    const char code = amino_acid_codes()[static_cast<std::size_t>(i)];
    csv += std::string(1, code) + "," + std::to_string(0.1 * i) + ",NA," +
           std::to_string(-1.0 + i) + "\n";
  }
  const auto table = parse_aaindex_csv(csv);
  REQUIRE(table.rows() == 20);
  REQUIRE(table.cols() == 3);
  CHECK(table(3, 0) == doctest::Approx(0.3));
  CHECK(std::isnan(table(0, 1)));
  CHECK(table(19, 2) == doctest::Approx(18.0));

  CHECK_THROWS_AS(parse_aaindex_csv("aa,v\nZ,1.0\n"), ParseError);
  CHECK_THROWS_AS(parse_aaindex_csv("aa,v\nA,1.0\nA,2.0\n"), ValidationError);
  CHECK_THROWS_AS(parse_aaindex_csv("aa,v\nA,zz\n"), ParseError);
  CHECK_THROWS_AS(parse_aaindex_csv(csv + "A,1,2,3\n"), ValidationError);  // duplicate
  CHECK_THROWS_AS(parse_aaindex_csv("aa,v\nA,1.0\n"), ValidationError);    // 19 rows missing
  CHECK_THROWS_AS(parse_aaindex_csv(csv + "\nC,1\n"), ValidationError);    // handled as dup
  std::string jagged = "aa,a,b\nA,1,2\nC,3\n";
  CHECK_THROWS_AS(parse_aaindex_csv(jagged), ParseError);
}

TEST_CASE("one-hot embedding layout") {
  const auto one_hot = Embedding::one_hot();
  const auto gly = AminoAcid::from_code('G').value();
  const auto feature = embed("ACD", 2, gly, one_hot, 0.75);
  REQUIRE(feature.size() == 61);
  CHECK(feature[feature.size() - 1] == 0.75);
  int ones = 0;
  for (Eigen::Index i = 0; i + 1 < feature.size(); ++i) {
    CHECK((feature[i] == 0.0 || feature[i] == 1.0));
    if (feature[i] == 1.0) ++ones;
  }
  CHECK(ones == 3);
  CHECK(feature[AminoAcid::from_code('A').value().index()] == 1.0);
  CHECK(feature[20 + gly.index()] == 1.0);
  CHECK(feature[40 + AminoAcid::from_code('D').value().index()] == 1.0);

  // Score only moves the final slot.
  const auto zero_score = embed("ACD", 2, gly, one_hot, 0.0);
  CHECK(zero_score[zero_score.size() - 1] == 0.0);
  CHECK((feature.head(60) - zero_score.head(60)).cwiseAbs().maxCoeff() == 0.0);

  // Two mutations at the same position differ only in that block + score.
  const auto other = embed("ACD", 2, AminoAcid::from_code('W').value(), one_hot, 0.75);
  CHECK((feature.head(20) - other.head(20)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((feature.segment(40, 20) - other.segment(40, 20)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((feature.segment(20, 20) - other.segment(20, 20)).cwiseAbs().maxCoeff() == 1.0);

  CHECK_THROWS_AS(embed("ACD", 0, gly, one_hot, 0.0), ValidationError);
  CHECK_THROWS_AS(embed("ACD", 4, gly, one_hot, 0.0), ValidationError);
  CHECK_THROWS_AS(embed("ACD", 2, AminoAcid::from_code('C').value(), one_hot, 0.0),
                  ValidationError);
  CHECK_THROWS_AS(embed("AXD", 2, gly, one_hot, 0.0), ValidationError);
  CHECK_THROWS_AS(embed("", 1, gly, one_hot, 0.0), ValidationError);
}

TEST_CASE("reduced-index embedding uses the table rows") {
  const Eigen::MatrixXd reduced = random_matrix(20, 19, 7);
  const auto kind = Embedding::aa_index(reduced);
  CHECK(kind.dim() == 19);
  const auto trp = AminoAcid::from_code('W').value();
  const auto feature = embed("ACD", 3, trp, kind, -0.5);
  REQUIRE(feature.size() == 19 * 3 + 1);
  CHECK((feature.segment(0, 19).transpose() -
         reduced.row(AminoAcid::from_code('A').value().index()))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((feature.segment(38, 19).transpose() - reduced.row(trp.index())).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(feature[57] == -0.5);

  CHECK_THROWS_AS(Embedding::aa_index(Eigen::MatrixXd::Random(20, 18)), DimensionalityError);
  CHECK_THROWS_AS(Embedding::aa_index(Eigen::MatrixXd::Random(19, 19)), DimensionalityError);
}

TEST_CASE("ridge recovers an exact line without regularization") {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  Eigen::VectorXd y(3);
  y << 2, 4, 6;
  const auto model = ridge_fit(x, y, 0.0);
  CHECK(model.weights[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(model.intercept == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(model.predict(x.row(1)) == doctest::Approx(4.0).epsilon(1e-10));
  check_stationarity(x, y, model);
}

TEST_CASE("extreme regularization shrinks weights to zero") {
  const Eigen::MatrixXd x = random_matrix(30, 6, 8);
  const Eigen::VectorXd y = random_matrix(30, 1, 9);
  const auto model = ridge_fit(x, y, 1e9);
  CHECK(model.weights.cwiseAbs().maxCoeff() < 1e-6);
  // Prediction collapses to the target mean.
  CHECK(model.predict(x.row(0)) == doctest::Approx(y.mean()).epsilon(1e-5));
  check_stationarity(x, y, model);
}

TEST_CASE("ridge matches the dense normal-equation oracle") {
  const Eigen::MatrixXd x = random_matrix(50, 10, 10);
  const Eigen::VectorXd y = random_matrix(50, 1, 11);
  const double lambda = 0.5;
  const auto model = ridge_fit(x, y, lambda);

  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::MatrixXd normal =
      xc.transpose() * xc + lambda * Eigen::MatrixXd::Identity(10, 10);
  const Eigen::VectorXd oracle = normal.inverse() * (xc.transpose() * yc);
  CHECK((model.weights - oracle).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(model.intercept ==
        doctest::Approx(y.mean() - x.colwise().mean().dot(oracle)).epsilon(1e-8));
  check_stationarity(x, y, model);
}

TEST_CASE("the dual solve equals the primal solution when features outnumber samples") {
  const Eigen::MatrixXd x = random_matrix(10, 50, 12);
  const Eigen::VectorXd y = random_matrix(10, 1, 13);
  const double lambda = 0.5;
  const auto model = ridge_fit(x, y, lambda);  // takes the dual path

  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::MatrixXd normal =
      xc.transpose() * xc + lambda * Eigen::MatrixXd::Identity(50, 50);
  const Eigen::VectorXd oracle = normal.inverse() * (xc.transpose() * yc);
  CHECK((model.weights - oracle).cwiseAbs().maxCoeff() < 1e-8);
  check_stationarity(x, y, model);
}

TEST_CASE("unregularized rank-deficient systems are rejected") {
  // More features than samples.
  CHECK_THROWS_AS(ridge_fit(random_matrix(10, 20, 14), random_matrix(10, 1, 15), 0.0),
                  SingularSystemError);
  // Duplicate column.
  Eigen::MatrixXd x = random_matrix(30, 4, 16);
  x.col(3) = x.col(1);
  CHECK_THROWS_AS(ridge_fit(x, random_matrix(30, 1, 17), 0.0), SingularSystemError);
  // The same designs succeed with any positive strength.
  check_stationarity(x, random_matrix(30, 1, 17),
                     ridge_fit(x, random_matrix(30, 1, 17), 1e-3));
  CHECK_THROWS_AS(ridge_fit(x, random_matrix(30, 1, 17), -0.1), ValidationError);
  CHECK_THROWS_AS(ridge_fit(Eigen::MatrixXd(0, 3), Eigen::VectorXd(0), 1.0), ValidationError);
  CHECK_THROWS_AS(ridge_fit(random_matrix(5, 3, 18), random_matrix(4, 1, 19), 1.0),
                  ValidationError);
}

TEST_CASE("list-of-features overload matches the matrix form") {
  const Eigen::MatrixXd x = random_matrix(12, 5, 20);
  const Eigen::VectorXd y = random_matrix(12, 1, 21);
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> targets;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    rows.push_back(x.row(i));
    targets.push_back(y[i]);
  }
  const auto a = ridge_fit(x, y, 0.25);
  const auto b = ridge_fit(rows, targets, 0.25);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.intercept == b.intercept);
}

TEST_CASE("a zeroed score column reproduces the baseline model") {
  // Adding an identically-zero column must not move predictions.
  const Eigen::MatrixXd base = random_matrix(25, 6, 22);
  Eigen::MatrixXd padded(25, 7);
  padded << base, Eigen::VectorXd::Zero(25);
  const Eigen::VectorXd y = random_matrix(25, 1, 23);
  const auto lean = ridge_fit(base, y, 1.0);
  const auto fat = ridge_fit(padded, y, 1.0);
  for (Eigen::Index i = 0; i < base.rows(); ++i) {
    CHECK(lean.predict(base.row(i)) == doctest::Approx(fat.predict(padded.row(i))).epsilon(1e-10));
  }
}

TEST_CASE("a sufficient score feature saturates the learning curve") {
  const auto fixture = make_sufficient(6, 404);  // 6 positions, 114 mutations
  LearningCurveConfig config;
  config.sizes = {20, 40, 60};
  config.repeats = 3;
  config.lambda = 1e-6;
  config.seed = 42;
  const auto result =
      learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), config);

  for (int size : config.sizes) {
    const double augmented = aggregate_mean(result, size, "augmented.spearman_all");
    const double baseline = aggregate_mean(result, size, "baseline.spearman_all");
    CHECK(augmented >= 0.99);
    CHECK(baseline < augmented);
  }
}

TEST_CASE("learning curves are deterministic and order-independent") {
  const auto fixture = make_sufficient(4, 505);
  LearningCurveConfig config;
  config.sizes = {12, 24};
  config.repeats = 1;
  config.lambda = 1.0;
  config.seed = 7;
  const auto a = learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), config);
  const auto b = learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), config);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].size == b.points[i].size);
    CHECK(a.points[i].repeat == b.points[i].repeat);
    CHECK(a.points[i].metric == b.points[i].metric);
    CHECK(a.points[i].value == b.points[i].value);
  }
  CHECK(learning_curve_to_csv(a.points) == learning_curve_to_csv(b.points));

  // Sizes evaluated in the opposite order give identical aggregates.
  auto flipped = config;
  flipped.sizes = {24, 12};
  const auto c = learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), flipped);
  REQUIRE(a.aggregates.size() == c.aggregates.size());
  for (std::size_t i = 0; i < a.aggregates.size(); ++i) {
    CHECK(a.aggregates[i].size == c.aggregates[i].size);
    CHECK(a.aggregates[i].metric == c.aggregates[i].metric);
    CHECK(a.aggregates[i].mean == c.aggregates[i].mean);
    CHECK(a.aggregates[i].stddev == c.aggregates[i].stddev);
  }

  // Serial and parallel repeats agree.
  auto serial = config;
  serial.repeats = 3;
  auto parallel = serial;
  serial.parallel = false;
  parallel.parallel = true;
  const auto s = learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), serial);
  const auto p = learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), parallel);
  CHECK(learning_curve_to_csv(s.points) == learning_curve_to_csv(p.points));
}

TEST_CASE("learning-curve preconditions name the assay") {
  const auto fixture = make_sufficient(4, 606);  // 76 mutations, pool 61
  LearningCurveConfig config;
  config.sizes = {70};
  config.repeats = 1;
  try {
    learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), config);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("sufficiency") != std::string::npos);
  }

  auto no_sequence = fixture.assay;
  no_sequence.sequence.clear();
  config.sizes = {10};
  CHECK_THROWS_AS(learning_curve(no_sequence, fixture.matrix, Embedding::one_hot(), config),
                  ValidationError);

  auto missing_row = fixture.matrix;
  missing_row.positions.pop_back();
  missing_row.wildtype.pop_back();
  missing_row.scores.conservativeResize(missing_row.scores.rows() - 1, 20);
  CHECK_THROWS_AS(learning_curve(fixture.assay, missing_row, Embedding::one_hot(), config),
                  ValidationError);
}

TEST_CASE("curve CSV layout") {
  const auto fixture = make_sufficient(4, 707);
  LearningCurveConfig config;
  config.sizes = {24, 48};
  config.repeats = 2;
  const auto result =
      learning_curve(fixture.assay, fixture.matrix, Embedding::one_hot(), config);

  const auto csv = learning_curve_to_csv(result.points);
  CHECK(csv.rfind("size,repeat,metric,value\n", 0) == 0);
  // 2 sizes x 2 repeats x 2 models x 4 metrics data rows.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 2 * 4);

  const auto agg = curve_aggregates_to_csv(result.aggregates);
  CHECK(agg.rfind("size,metric,mean,std\n", 0) == 0);
  // 2 sizes x 8 metric names.
  CHECK(std::count(agg.begin(), agg.end(), '\n') == 1 + 2 * 8);
  CHECK(agg.find("augmented.top10_precision") != std::string::npos);
  CHECK(agg.find("baseline.spearman_better_wt") != std::string::npos);
}
