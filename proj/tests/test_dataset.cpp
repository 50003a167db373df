#include <doctest.h>

#include "fairaudit/csv.hpp"
#include "fairaudit/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

using namespace fairaudit;

namespace {

Dataset four_rows() {
  // rows {(S=0,Yhat=1),(S=0,Yhat=0),(S=1,Yhat=1),(S=1,Yhat=1)}
  Dataset d;
  d.X.resize(4, 1);
  d.X << 1, 2, 3, 4;
  d.S.resize(4);
  d.S << 0, 0, 1, 1;
  d.Yhat.resize(4);
  d.Yhat << 1, 0, 1, 1;
  d.feature_names = {"age"};
  return d;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path = "/tmp/fairaudit_test_" + std::to_string(++counter) + ".csv";
    std::ofstream os(path);
    os << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("group_counts on datasets and weighted distributions") {
  const Dataset d = four_rows();
  const GroupCounts c = group_counts(d);
  CHECK(c.n0 == 2);
  CHECK(c.n1 == 2);
  CHECK(c.lambda0 == 1);
  CHECK(c.lambda1 == 2);

  // uniform weights reproduce the plain counts
  const GroupCounts cu = group_counts(uniform_weights(d));
  CHECK(cu.n0 == doctest::Approx(c.n0));
  CHECK(cu.lambda1 == doctest::Approx(c.lambda1));

  // masses are weight sums scaled by n
  WeightedDistribution w = uniform_weights(d);
  w.weights << 0.5, 0.5, 0.0, 0.0;
  const GroupCounts cw = group_counts(w);
  CHECK(cw.n0 == doctest::Approx(4.0));
  CHECK(cw.lambda0 == doctest::Approx(2.0));
  CHECK(cw.n1 == doctest::Approx(0.0));
  CHECK(cw.lambda1 == doctest::Approx(0.0));
}

TEST_CASE("group masses satisfy n0+n1=n and 0<=lambda<=n") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset d = four_rows();
  for (int rep = 0; rep < 50; ++rep) {
    WeightedDistribution w = uniform_weights(d);
    for (int i = 0; i < 4; ++i) w.weights[i] = unif(rng);
    w.weights /= w.weights.sum();
    const GroupCounts c = group_counts(w);
    CHECK(c.n0 + c.n1 == doctest::Approx(4.0));
    CHECK(c.lambda0 >= 0.0);
    CHECK(c.lambda0 <= c.n0 + 1e-12);
    CHECK(c.lambda1 <= c.n1 + 1e-12);
  }
}

TEST_CASE("disparate impact arithmetic and conventions") {
  CHECK(disparate_impact({4, 4, 1, 2}) == doctest::Approx(0.5));
  CHECK(disparate_impact({100, 100, 10, 40}) == doctest::Approx(0.25));
  CHECK(std::isinf(disparate_impact({4, 4, 1, 0})));
  CHECK(disparate_impact({4, 4, 0, 0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(disparate_impact({0, 4, 0, 1}), std::domain_error);
  CHECK_THROWS_AS(disparate_impact({4, 0, 1, 0}), std::domain_error);
}

TEST_CASE("disparate impact invariant under permutation and duplication") {
  std::mt19937_64 rng(7);
  Dataset d;
  const int n = 40;
  d.X.resize(n, 1);
  d.S.resize(n);
  d.Yhat.resize(n);
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = i;
    d.S[i] = coin(rng) ? 1 : 0;
    d.Yhat[i] = coin(rng) ? 1 : 0;
  }
  d.S[0] = 0;
  d.S[1] = 1;
  d.Yhat[1] = 1;  // keep DI well-defined and finite
  const double di = disparate_impact(d);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  CHECK(disparate_impact(take_rows(d, order)) == doctest::Approx(di));

  std::vector<int> doubled(order);
  doubled.insert(doubled.end(), order.begin(), order.end());
  CHECK(disparate_impact(take_rows(d, doubled)) == doctest::Approx(di));
}

TEST_CASE("sample_fraction full draw without replacement is a permutation") {
  Dataset d = four_rows();
  std::mt19937_64 rng(3);
  const Dataset s = sample_fraction(d, 1.0, rng, false);
  REQUIRE(s.rows() == 4);
  Eigen::VectorXd got = s.X.col(0);
  std::sort(got.data(), got.data() + got.size());
  for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(i + 1));
}

TEST_CASE("sample_fraction degenerate weights draw one atom") {
  Dataset d = four_rows();
  WeightedDistribution w = uniform_weights(d);
  w.weights << 0, 0, 0, 1;
  std::mt19937_64 rng(5);
  const Dataset s = sample_fraction(w, 1.0, rng, true);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    CHECK(s.X(i, 0) == doctest::Approx(4.0));
  }
}

TEST_CASE("sample_fraction law of large numbers") {
  Dataset d;
  d.X.resize(2, 1);
  d.X << 0, 1;
  d.S.resize(2);
  d.S << 0, 1;
  d.Yhat.resize(2);
  d.Yhat << 0, 1;
  WeightedDistribution w = uniform_weights(d);
  w.weights << 0.2, 0.8;

  std::mt19937_64 rng(17);
  long hits = 0;
  const int draws = 100000;
  for (int rep = 0; rep < draws / 2; ++rep) {
    const Dataset s = sample_fraction(w, 1.0, rng, true);
    hits += (s.X.col(0).array() > 0.5).count();
  }
  const double freq = static_cast<double>(hits) / draws;
  CHECK(std::abs(freq - 0.8) <= 0.01);
}

TEST_CASE("sample_fraction rejects without-replacement on non-uniform weights") {
  Dataset d = four_rows();
  WeightedDistribution w = uniform_weights(d);
  w.weights << 0.4, 0.3, 0.2, 0.1;
  std::mt19937_64 rng(1);
  CHECK_THROWS(sample_fraction(w, 0.5, rng, false));
}

TEST_CASE("sample_fraction is bit-reproducible under a fixed seed") {
  Dataset d = four_rows();
  std::mt19937_64 rng_a(42), rng_b(42);
  const Dataset a = sample_fraction(d, 0.5, rng_a, false);
  const Dataset b = sample_fraction(d, 0.5, rng_b, false);
  CHECK(a.X == b.X);
  CHECK(a.S == b.S);
}

TEST_CASE("load_csv binds columns by schema") {
  TempFile f("age,s,yhat\n31,0,1\n44,1,0\n27,1,1\n");
  CsvSchema schema;
  const Dataset d = load_csv(f.path, schema);
  CHECK(d.rows() == 3);
  CHECK(d.dim() == 1);
  CHECK(d.feature_names[0] == "age");
  CHECK(d.X(0, 0) == doctest::Approx(31));
  CHECK(d.S[1] == 1);
  CHECK(d.Yhat[2] == 1);
}

TEST_CASE("load_csv reports offending rows") {
  CsvSchema schema;
  TempFile bad_s("age,s,yhat\n31,0,1\n44,2,0\n");
  CHECK_THROWS_WITH_AS(load_csv(bad_s.path, schema),
                       doctest::Contains("row 2"), std::runtime_error);

  TempFile bad_num("age,s,yhat\n31,0,1\nxx,1,0\n");
  CHECK_THROWS_WITH_AS(load_csv(bad_num.path, schema),
                       doctest::Contains("unparseable"), std::runtime_error);

  TempFile empty("");
  CHECK_THROWS_WITH_AS(load_csv(empty.path, schema),
                       doctest::Contains("no data rows"), std::runtime_error);

  TempFile header_only("age,s,yhat\n");
  CHECK_THROWS_WITH_AS(load_csv(header_only.path, schema),
                       doctest::Contains("no data rows"), std::runtime_error);

  TempFile missing("age,yhat\n31,1\n");
  CHECK_THROWS_WITH_AS(load_csv(missing.path, schema),
                       doctest::Contains("missing column 's'"),
                       std::runtime_error);
}

TEST_CASE("csv round-trip preserves values exactly") {
  Dataset d = four_rows();
  d.X(0, 0) = 0.1234567890123456789;  // must survive the text round trip
  d.logits = Eigen::VectorXd(4);
  *d.logits << 0.25, 0.5, 0.75, 0.994;
  d.Y = Eigen::VectorXi(4);
  *d.Y << 1, 0, 1, 1;

  TempFile f("");
  save_csv(f.path, d);
  CsvSchema schema;
  schema.y_col = "y";
  schema.logit_col = "logit";
  const Dataset back = load_csv(f.path, schema);
  CHECK(back.X == d.X);
  CHECK(back.S == d.S);
  CHECK(back.Yhat == d.Yhat);
  CHECK(*back.logits == *d.logits);
  CHECK(*back.Y == *d.Y);

  WeightedDistribution w = uniform_weights(d);
  w.weights << 0.4, 0.3, 0.2, 0.1;
  save_csv(f.path, w);
  const WeightedDistribution wb = load_weighted_csv(f.path, schema);
  CHECK(wb.weights == w.weights);
  CHECK(wb.base.X == d.X);
}

TEST_CASE("validation catches broken invariants") {
  Dataset d = four_rows();
  d.S[0] = 3;
  CHECK_THROWS(d.validate());
  d = four_rows();
  d.logits = Eigen::VectorXd(4);
  *d.logits << 0.1, 0.2, 1.5, 0.3;
  CHECK_THROWS(d.validate());

  WeightedDistribution w = uniform_weights(four_rows());
  w.weights[0] = -0.25;
  w.weights[1] = 0.75;
  CHECK_THROWS(w.validate());
}
