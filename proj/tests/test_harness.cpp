#include <doctest.h>

#include "fairaudit/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace fairaudit;

TEST_CASE("gen_synthetic hits the configured rates") {
  SyntheticSpec spec;
  spec.n = 10000;
  spec.p_s = 0.5;
  spec.p0 = 0.12;
  spec.p1 = 0.40;
  CHECK(spec.implied_di() == doctest::Approx(0.30));

  std::mt19937_64 rng(8);
  const Dataset d = gen_synthetic(spec, rng);
  CHECK(d.rows() == 10000);
  const GroupCounts c = group_counts(d);

  // empirical rates within 3 standard errors of the binomial
  const double r0 = c.lambda0 / c.n0;
  const double se0 = std::sqrt(0.12 * 0.88 / c.n0);
  CHECK(std::abs(r0 - 0.12) <= 3 * se0);
  const double r1 = c.lambda1 / c.n1;
  const double se1 = std::sqrt(0.40 * 0.60 / c.n1);
  CHECK(std::abs(r1 - 0.40) <= 3 * se1);

  // equal rates imply DI near one
  SyntheticSpec fair = spec;
  fair.p0 = fair.p1 = 0.3;
  std::mt19937_64 rng2(9);
  const Dataset f = gen_synthetic(fair, rng2);
  const GroupCounts cf = group_counts(f);
  const double di = disparate_impact(cf);
  const double se = 3 * std::sqrt(0.3 * 0.7 / std::min(cf.n0, cf.n1)) / 0.3;
  CHECK(std::abs(di - 1.0) <= 2.5 * se);
}

TEST_CASE("gen_synthetic is deterministic per seed") {
  SyntheticSpec spec;
  spec.n = 64;
  std::mt19937_64 a(5), b(5), c(6);
  const Dataset da = gen_synthetic(spec, a);
  const Dataset db = gen_synthetic(spec, b);
  const Dataset dc = gen_synthetic(spec, c);
  CHECK(da.X == db.X);
  CHECK(da.S == db.S);
  CHECK(da.X != dc.X);
}

TEST_CASE("method registry round-trips names") {
  for (MethodId id : all_methods()) {
    CHECK(parse_method(method_name(id)) == id);
  }
  CHECK(parse_method("entropic_b") == MethodId::entropic_b);
  CHECK(parse_method("GRAD_P_1D") == MethodId::grad_p_1d);
  CHECK_THROWS(parse_method("nope"));
}

TEST_CASE("config json round-trip") {
  ExperimentConfig cfg;
  cfg.seed = 321;
  cfg.di_grid = {0.5, 0.6};
  cfg.methods = {MethodId::replace, MethodId::matching};
  cfg.audit.n_ref = 77;
  const std::string path = "/tmp/fairaudit_cfg.json";
  {
    std::ofstream os(path);
    os << config_to_json(cfg);
  }
  const ExperimentConfig back = config_from_json_file(path);
  std::remove(path.c_str());
  CHECK(back.seed == 321);
  CHECK(back.di_grid == cfg.di_grid);
  CHECK(back.methods == cfg.methods);
  CHECK(back.audit.n_ref == 77);
  CHECK(back.synthetic.has_value());
}

TEST_CASE("run_experiment produces a consistent small bundle") {
  ExperimentConfig cfg;
  cfg.synthetic->n = 500;
  cfg.synthetic->cube_side = 6.0;
  cfg.model.epochs = 40;
  cfg.methods = {MethodId::replace, MethodId::entropic_b};
  cfg.di_grid = {0.55, 0.7};
  cfg.audit.n_ref = 50;
  cfg.audit.max_tries = 5;
  cfg.audit.search_max_tries = 10;
  cfg.seed = 2023;
  cfg.out_dir = "/tmp/fairaudit_bundle";
  cfg.workers = 2;
  cfg.emit_svg = true;
  std::filesystem::remove_all(cfg.out_dir);

  const ExperimentReport report = run_experiment(cfg);
  CHECK(report.reference_di > 0.0);
  REQUIRE(report.cells.size() == 4);
  for (const auto& cell : report.cells) {
    if (!cell.ok) continue;
    // achieved DI is never silently below target
    CHECK(cell.achieved_di >= cell.target_di - 1e-9);
    CHECK(cell.metrics.w_xsy >= 0.0);
  }
  CHECK(report.searches.size() == 2);

  write_report_bundle(report, cfg);
  namespace fs = std::filesystem;
  for (const char* name :
       {"curves.csv", "radar.csv", "battery_summary.csv", "search_summary.csv",
        "manifest.json", "reference.csv", "curves_w.svg", "curves_kl.svg"}) {
    CHECK(fs::exists(fs::path(cfg.out_dir) / name));
  }

  // the emitted reference CSV round-trips through load_csv
  CsvSchema schema;
  schema.y_col = "y";
  schema.logit_col = "logit";
  const Dataset back =
      load_csv((fs::path(cfg.out_dir) / "reference.csv").string(), schema);
  CHECK(back.X == report.reference.X);
  CHECK(back.S == report.reference.S);
  CHECK(*back.logits == *report.reference.logits);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("run_experiment is deterministic under a fixed seed") {
  ExperimentConfig cfg;
  cfg.synthetic->n = 300;
  cfg.synthetic->cube_side = 6.0;
  cfg.model.epochs = 25;
  cfg.methods = {MethodId::replace};
  cfg.di_grid = {0.6};
  cfg.audit.n_ref = 50;
  cfg.audit.max_tries = 3;
  cfg.run_search = false;
  cfg.seed = 555;

  const ExperimentReport a = run_experiment(cfg);
  const ExperimentReport b = run_experiment(cfg);
  CHECK(a.reference_di == b.reference_di);
  CHECK(a.reference.X == b.reference.X);
  REQUIRE(a.cells.size() == b.cells.size());
  CHECK(a.cells[0].achieved_di == b.cells[0].achieved_di);
  CHECK(a.cells[0].metrics.w_xsy == b.cells[0].metrics.w_xsy);
  CHECK(a.cells[0].battery.fractions[0].tries_used ==
        b.cells[0].battery.fractions[0].tries_used);

  // the two report bundles are byte-identical
  namespace fs = std::filesystem;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  ExperimentConfig ca = cfg, cb = cfg;
  ca.out_dir = "/tmp/fairaudit_det_a";
  cb.out_dir = "/tmp/fairaudit_det_b";
  fs::remove_all(ca.out_dir);
  fs::remove_all(cb.out_dir);
  write_report_bundle(a, ca);
  write_report_bundle(b, cb);
  for (const char* name : {"curves.csv", "radar.csv", "battery_summary.csv",
                           "reference.csv"}) {
    CHECK(slurp(fs::path(ca.out_dir) / name) ==
          slurp(fs::path(cb.out_dir) / name));
  }
  fs::remove_all(ca.out_dir);
  fs::remove_all(cb.out_dir);
}
