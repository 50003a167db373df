#include "fairaudit/experiment.hpp"

#include "fairaudit/entropic.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fairaudit {

namespace {

using nlohmann::json;

std::vector<double> default_grid(double di0) {
  // Six evenly spaced targets from just above the original DI up to 0.8
  // (or past it when the data is already nearly fair).
  const double lo = di0 + 0.05;
  const double hi = std::max(0.8, di0 + 0.35);
  std::vector<double> grid;
  for (int k = 0; k < 6; ++k) {
    grid.push_back(lo + (hi - lo) * static_cast<double>(k) / 5.0);
  }
  return grid;
}

}  // namespace

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j = json::parse(in);
  ExperimentConfig cfg;
  cfg.version = j.value("version", 1);
  if (cfg.version != 1) {
    throw std::runtime_error("unsupported config schema version");
  }
  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    SyntheticSpec spec;
    spec.n = s.value("n", spec.n);
    spec.dim = s.value("dim", spec.dim);
    spec.p_s = s.value("p_s", spec.p_s);
    spec.p0 = s.value("p0", spec.p0);
    spec.p1 = s.value("p1", spec.p1);
    spec.cube_side = s.value("cube_side", spec.cube_side);
    spec.label_noise = s.value("label_noise", spec.label_noise);
    cfg.synthetic = spec;
  }
  if (j.contains("csv")) {
    const json& c = j["csv"];
    cfg.csv_path = c.at("path").get<std::string>();
    cfg.synthetic.reset();
    cfg.schema.s_col = c.value("s_col", cfg.schema.s_col);
    cfg.schema.yhat_col = c.value("yhat_col", cfg.schema.yhat_col);
    if (c.contains("y_col")) cfg.schema.y_col = c["y_col"].get<std::string>();
    if (c.contains("logit_col")) {
      cfg.schema.logit_col = c["logit_col"].get<std::string>();
    }
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    if (m.contains("hidden")) {
      cfg.model.hidden = m["hidden"].get<std::vector<int>>();
    }
    cfg.model.epochs = m.value("epochs", cfg.model.epochs);
    cfg.model.learning_rate = m.value("learning_rate", cfg.model.learning_rate);
    cfg.model.batch_size = m.value("batch_size", cfg.model.batch_size);
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& name : j["methods"]) {
      cfg.methods.push_back(parse_method(name.get<std::string>()));
    }
  }
  if (j.contains("di_grid")) {
    cfg.di_grid = j["di_grid"].get<std::vector<double>>();
  }
  if (j.contains("audit")) {
    const json& a = j["audit"];
    cfg.audit.alpha = a.value("alpha", cfg.audit.alpha);
    cfg.audit.n_ref = a.value("n_ref", cfg.audit.n_ref);
    if (a.contains("sample_fractions")) {
      cfg.audit.sample_fractions =
          a["sample_fractions"].get<std::vector<double>>();
    }
    cfg.audit.max_tries = a.value("max_tries", cfg.audit.max_tries);
    cfg.audit.search_max_tries =
        a.value("search_max_tries", cfg.audit.search_max_tries);
    cfg.audit.two_sided = a.value("two_sided", cfg.audit.two_sided);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.workers = j.value("workers", cfg.workers);
  cfg.emit_svg = j.value("emit_svg", cfg.emit_svg);
  cfg.run_battery = j.value("run_battery", cfg.run_battery);
  cfg.run_search = j.value("run_search", cfg.run_search);
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  if (cfg.synthetic) {
    j["synthetic"] = {{"n", cfg.synthetic->n},
                      {"dim", cfg.synthetic->dim},
                      {"p_s", cfg.synthetic->p_s},
                      {"p0", cfg.synthetic->p0},
                      {"p1", cfg.synthetic->p1},
                      {"cube_side", cfg.synthetic->cube_side},
                      {"label_noise", cfg.synthetic->label_noise}};
  }
  if (cfg.csv_path) {
    j["csv"] = {{"path", *cfg.csv_path},
                {"s_col", cfg.schema.s_col},
                {"yhat_col", cfg.schema.yhat_col}};
    if (cfg.schema.y_col) j["csv"]["y_col"] = *cfg.schema.y_col;
    if (cfg.schema.logit_col) j["csv"]["logit_col"] = *cfg.schema.logit_col;
  }
  j["model"] = {{"hidden", cfg.model.hidden},
                {"epochs", cfg.model.epochs},
                {"learning_rate", cfg.model.learning_rate},
                {"batch_size", cfg.model.batch_size}};
  j["methods"] = json::array();
  for (MethodId m : cfg.methods) j["methods"].push_back(method_name(m));
  j["di_grid"] = cfg.di_grid;
  j["audit"] = {{"alpha", cfg.audit.alpha},
                {"n_ref", cfg.audit.n_ref},
                {"sample_fractions", cfg.audit.sample_fractions},
                {"max_tries", cfg.audit.max_tries},
                {"search_max_tries", cfg.audit.search_max_tries},
                {"two_sided", cfg.audit.two_sided}};
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["workers"] = cfg.workers;
  j["emit_svg"] = cfg.emit_svg;
  j["run_battery"] = cfg.run_battery;
  j["run_search"] = cfg.run_search;
  return j.dump(2);
}

Dataset attach_predictions(const Dataset& data, const Classifier& model) {
  Dataset out = data;
  out.logits = model.predict_logits(out.X);
  out.Yhat = model.predict_labels(out.X);
  return out;
}

ShiftMetrics shift_metrics(const Distribution& manipulated,
                           const Dataset& reference) {
  const Dataset& base = base_of(manipulated);
  const Standardizer std_ = Standardizer::fit(reference);
  const Eigen::MatrixXd ref_embed = embed_records(reference, std_);
  const Eigen::MatrixXd man_embed = embed_records(base, std_);
  const Eigen::VectorXd ref_w = Eigen::VectorXd::Constant(
      reference.rows(), 1.0 / static_cast<double>(reference.rows()));
  Eigen::VectorXd man_w;
  if (const auto* w = std::get_if<WeightedDistribution>(&manipulated)) {
    man_w = w->weights;
  } else {
    man_w = Eigen::VectorXd::Constant(
        base.rows(), 1.0 / static_cast<double>(base.rows()));
  }

  // Raw records for the exact-match KL; standardized ones for W and MMD.
  Eigen::MatrixXd ref_raw(reference.rows(), reference.dim() + 2);
  ref_raw.leftCols(reference.dim()) = reference.X;
  ref_raw.col(reference.dim()) = reference.S.cast<double>();
  ref_raw.col(reference.dim() + 1) = reference.Yhat.cast<double>();
  Eigen::MatrixXd man_raw(base.rows(), base.dim() + 2);
  man_raw.leftCols(base.dim()) = base.X;
  man_raw.col(base.dim()) = base.S.cast<double>();
  man_raw.col(base.dim() + 1) = base.Yhat.cast<double>();

  ShiftMetrics m;
  WassersteinOptions wopts;
  wopts.allow_large = true;
  m.w_xsy =
      wasserstein_exact(man_embed, man_w, ref_embed, ref_w, wopts).first;
  m.w_sy = wasserstein_sy(sy_histogram(manipulated), sy_histogram(reference));
  m.kl_xsy = kl_atoms(man_raw, man_w, ref_raw, ref_w);
  m.kl_sy = kl_sy(sy_histogram(manipulated), sy_histogram(reference));
  const double bw = median_pairwise_distance(ref_embed);
  m.mmd_xsy = mmd2(man_embed, man_w, ref_embed, ref_w, KernelSpec::fixed(bw));
  Eigen::MatrixXd corners(4, 2);
  corners << 0, 0, 0, 1, 1, 0, 1, 1;
  m.mmd_sy = mmd2(corners, sy_histogram(manipulated), corners,
                  sy_histogram(reference),
                  KernelSpec::fixed(median_pairwise_distance(corners)));
  return m;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  ExperimentReport report;

  Dataset raw;
  if (config.csv_path) {
    raw = load_csv(*config.csv_path, config.schema);
  } else if (config.synthetic) {
    std::mt19937_64 rng(mix_seed(config.seed, 0xda7aU));
    raw = gen_synthetic(*config.synthetic, rng);
  } else {
    throw std::invalid_argument("experiment needs a data source");
  }
  if (!raw.Y) {
    throw std::invalid_argument("experiment data needs ground-truth Y");
  }

  std::mt19937_64 fit_rng(mix_seed(config.seed, 0xf17U));
  Classifier model = fit(raw, config.model, fit_rng, &report.fit);
  const Eigen::VectorXd logits = model.predict_logits(raw.X);
  model.set_threshold(std::clamp(select_threshold(logits, *raw.Y), 1e-6,
                                 1.0 - 1e-6));
  report.reference = attach_predictions(raw, model);
  report.reference_di = disparate_impact(report.reference);
  report.di_grid = config.di_grid.empty() ? default_grid(report.reference_di)
                                          : config.di_grid;

  AuditConfig audit_cfg = config.audit;
  audit_cfg.seed = mix_seed(config.seed, 0xa0d17U);
  Auditor auditor(report.reference, &model, audit_cfg);

  // Cells are independent jobs on a bounded pool; results land in a fixed
  // method-major order regardless of completion order.
  struct Cell {
    MethodId method;
    double target;
  };
  std::vector<Cell> cells;
  for (MethodId m : config.methods) {
    for (double t : report.di_grid) cells.push_back({m, t});
  }
  std::vector<CellResult> results(cells.size());
  std::vector<Distribution> outputs(cells.size(),
                                    Distribution(Dataset{}));
  std::vector<bool> have_output(cells.size(), false);

  {
    std::atomic<std::size_t> next{0};
    const int workers =
        std::max(1, std::min<int>(config.workers,
                                  static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    auto work = [&]() {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= cells.size()) return;
        CellResult& r = results[c];
        r.method = cells[c].method;
        r.target_di = cells[c].target;
        try {
          MethodOptions opts = config.method_options;
          opts.match.seed = mix_seed(config.seed, 0xce11U + c);
          ManipulationResult mr = apply_method(
              cells[c].method, report.reference, &model, cells[c].target, opts);
          r.ok = true;
          r.achieved_di = mr.achieved_di;
          r.moves = mr.moves.size();
          r.metrics = shift_metrics(mr.output, report.reference);
          outputs[c] = std::move(mr.output);
          have_output[c] = true;
        } catch (const std::exception& e) {
          r.ok = false;
          r.error = e.what();
        }
      }
    };
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
  }

  // Batteries run in parallel; the auditor serializes null-table builds
  // internally and the tables are shared across cells.
  if (config.run_battery) {
    std::atomic<std::size_t> next{0};
    const int workers =
        std::max(1, std::min<int>(config.workers,
                                  static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    auto work = [&]() {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= cells.size()) return;
        if (have_output[c]) {
          results[c].battery = auditor.run_battery(outputs[c]);
        }
      }
    };
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
  }

  if (config.run_search) {
    // The search grid equals the cell grid, so manipulations are reused.
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const MethodId m = config.methods[mi];
      auto generate = [&](double target) -> Distribution {
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c].method == m && cells[c].target == target) {
            if (!have_output[c]) throw std::runtime_error(results[c].error);
            return outputs[c];
          }
        }
        MethodOptions opts = config.method_options;
        opts.match.seed = mix_seed(config.seed, 0x5ea4cU);
        return apply_method(m, report.reference, &model, target, opts).output;
      };
      report.searches.push_back(search_highest_undetected(
          auditor, generate, report.di_grid, method_name(m)));
    }
  }
  report.cells = std::move(results);
  return report;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  if (std::isinf(v)) {
    os << (v > 0 ? "inf" : "-inf");
  } else {
    os << std::setprecision(17) << v;
  }
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::string battery_symbols(const BatteryReport& battery) {
  // One symbol per test: '-' accepted at every fraction, 'o' only at the
  // largest, 'x' rejected everywhere.
  if (battery.fractions.empty()) return "";
  std::string symbols;
  const std::size_t tests = battery.fractions.front().ever_accepted.size();
  for (std::size_t s = 0; s < tests; ++s) {
    bool all = true, last = false;
    for (std::size_t f = 0; f < battery.fractions.size(); ++f) {
      const bool a = battery.fractions[f].ever_accepted[s];
      all = all && a;
      if (f + 1 == battery.fractions.size()) last = a;
    }
    symbols += all ? '-' : (last ? 'o' : 'x');
  }
  return symbols;
}

std::string svg_line_chart(
    const std::string& title,
    const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>&
        series) {
  const int w = 640, h = 420, pad = 56;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
  for (const auto& [name, pts] : series) {
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(y)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double x) {
    return pad + (x - xmin) / (xmax - xmin) * (w - 2 * pad);
  };
  auto py = [&](double y) {
    return h - pad - (y - ymin) / (ymax - ymin) * (h - 2 * pad);
  };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                 "#bcbd22"};
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='"
     << h << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='15'>"
     << title << "</text>\n";
  os << "<line x1='" << pad << "' y1='" << h - pad << "' x2='" << w - pad
     << "' y2='" << h - pad << "' stroke='black'/>\n";
  os << "<line x1='" << pad << "' y1='" << pad << "' x2='" << pad << "' y2='"
     << h - pad << "' stroke='black'/>\n";
  int idx = 0;
  for (const auto& [name, pts] : series) {
    std::ostringstream poly;
    bool any = false;
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(y)) continue;
      poly << px(x) << ',' << py(y) << ' ';
      any = true;
    }
    const char* color = colors[idx % 9];
    if (any) {
      os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' "
         << "points='" << poly.str() << "'/>\n";
    }
    os << "<text x='" << w - pad + 4 << "' y='" << pad + 14 * idx
       << "' font-size='11' fill='" << color << "'>" << name << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

void write_report_bundle(const ExperimentReport& report,
                         const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir(config.out_dir);
  fs::create_directories(dir / "battery");

  save_csv((dir / "reference.csv").string(), report.reference);

  // Trade-off curves: one row per method x target.
  {
    std::ostringstream os;
    os << "method,target_di,ok,achieved_di,moves,w_xsy,w_sy,kl_xsy,kl_sy,"
          "mmd_xsy,mmd_sy\n";
    for (const auto& c : report.cells) {
      os << method_name(c.method) << ',' << fmt(c.target_di) << ','
         << (c.ok ? 1 : 0) << ',' << fmt(c.achieved_di) << ',' << c.moves
         << ',' << fmt(c.metrics.w_xsy) << ',' << fmt(c.metrics.w_sy) << ','
         << fmt(c.metrics.kl_xsy) << ',' << fmt(c.metrics.kl_sy) << ','
         << fmt(c.metrics.mmd_xsy) << ',' << fmt(c.metrics.mmd_sy) << '\n';
    }
    write_file(dir / "curves.csv", os.str());
  }

  // Radar metrics: each method at its largest reached target.
  {
    std::ostringstream os;
    os << "method,target_di,w_xsy,w_sy,kl_xsy,kl_sy,mmd_xsy,mmd_sy\n";
    for (MethodId m : config.methods) {
      const CellResult* best = nullptr;
      for (const auto& c : report.cells) {
        if (c.method == m && c.ok) best = &c;
      }
      if (!best) continue;
      os << method_name(m) << ',' << fmt(best->target_di) << ','
         << fmt(best->metrics.w_xsy) << ',' << fmt(best->metrics.w_sy) << ','
         << fmt(best->metrics.kl_xsy) << ',' << fmt(best->metrics.kl_sy) << ','
         << fmt(best->metrics.mmd_xsy) << ',' << fmt(best->metrics.mmd_sy)
         << '\n';
    }
    write_file(dir / "radar.csv", os.str());
  }

  if (config.run_battery) {
    std::ostringstream os;
    os << "method,target_di,fraction,passed,tries,symbols\n";
    for (const auto& c : report.cells) {
      if (!c.ok) continue;
      const std::string symbols = battery_symbols(c.battery);
      for (const auto& f : c.battery.fractions) {
        os << method_name(c.method) << ',' << fmt(c.target_di) << ','
           << f.fraction << ',' << (f.passed ? 1 : 0) << ',' << f.tries_used
           << ',' << symbols << '\n';
      }
      std::ostringstream name;
      name << method_name(c.method) << "_"
           << std::llround(c.target_di * 1000) << ".json";
      write_file(dir / "battery" / name.str(), battery_to_json(c.battery));
    }
    write_file(dir / "battery_summary.csv", os.str());
  }

  if (config.run_search) {
    std::ostringstream os;
    os << "method";
    const auto& fractions = config.audit.sample_fractions;
    for (double f : fractions) {
      os << ",best_undetected@" << std::lround(f * 100) << '%';
    }
    os << '\n';
    for (const auto& s : report.searches) {
      os << s.method;
      for (double best : s.best_undetected) {
        if (std::isnan(best)) {
          os << ",--";
        } else {
          os << ',' << best;
        }
      }
      os << '\n';
    }
    write_file(dir / "search_summary.csv", os.str());
  }

  if (config.emit_svg) {
    auto curve_for = [&](auto metric) {
      std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>
          series;
      for (MethodId m : config.methods) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& c : report.cells) {
          if (c.method == m && c.ok) pts.emplace_back(c.target_di, metric(c));
        }
        series.emplace_back(method_name(m), std::move(pts));
      }
      return series;
    };
    write_file(dir / "curves_w.svg",
               svg_line_chart("W(X,S,Yhat) vs target DI", curve_for([](
                                  const CellResult& c) {
                                return c.metrics.w_xsy;
                              })));
    write_file(dir / "curves_kl.svg",
               svg_line_chart("KL(X,S,Yhat) vs target DI", curve_for([](
                                  const CellResult& c) {
                                return c.metrics.kl_xsy;
                              })));
  }

  json manifest;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["reference_di"] = report.reference_di;
  manifest["model_loss"] = report.fit.final_loss;
  manifest["model_accuracy"] = report.fit.accuracy;
  manifest["di_grid"] = report.di_grid;
  write_file(dir / "manifest.json", manifest.dump(2));
}

}  // namespace fairaudit
