// Command-line surface: synthetic data generation, model training,
// fair-washing manipulation, the detection battery, the highest-undetected
// DI search, and the full experiment report bundle.

#include "fairaudit/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

namespace fa = fairaudit;

namespace {

bool header_has(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  std::string header;
  if (!std::getline(in, header)) return false;
  std::stringstream ss(header);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    if (cell == name) return true;
  }
  return false;
}

// Optional columns default to auto-detection by their canonical names, so
// files written by this tool reload without extra flags.
fa::CsvSchema schema_for(const std::string& path, const std::string& s_col,
                         const std::string& yhat_col, const std::string& y_col,
                         const std::string& logit_col) {
  fa::CsvSchema schema;
  schema.s_col = s_col;
  schema.yhat_col = yhat_col;
  if (!y_col.empty()) {
    if (y_col != "auto") {
      schema.y_col = y_col;
    } else if (header_has(path, "y")) {
      schema.y_col = "y";
    }
  }
  if (!logit_col.empty()) {
    if (logit_col != "auto") {
      schema.logit_col = logit_col;
    } else if (header_has(path, "logit")) {
      schema.logit_col = "logit";
    }
  }
  return schema;
}

fa::Distribution load_distribution(const std::string& path,
                                   const fa::CsvSchema& schema) {
  // A "weight" column marks a reweighted distribution.
  if (header_has(path, "weight")) {
    return fa::load_weighted_csv(path, schema);
  }
  return fa::load_csv(path, schema);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairaudit: fairness manipulation and detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = "out";
  if (const char* env = std::getenv("FAIRAUDIT_OUT")) out_dir = env;
  app.add_option("--seed", seed, "master random seed")->capture_default_str();
  app.add_option("--config", config_path, "experiment config JSON");
  app.add_option("--out", out_dir,
                 "output directory (default from FAIRAUDIT_OUT)")
      ->capture_default_str();

  std::string s_col = "s", yhat_col = "yhat", y_col = "auto",
              logit_col = "auto";
  app.add_option("--s-col", s_col, "sensitive column name");
  app.add_option("--yhat-col", yhat_col, "decision column name");
  app.add_option("--y-col", y_col,
                 "ground-truth column ('auto' detects 'y', '' = absent)");
  app.add_option("--logit-col", logit_col,
                 "stored logit column ('auto' detects 'logit', '' = absent)");

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic dataset");
  fa::SyntheticSpec spec;
  std::string gen_out = "synthetic.csv";
  gen->add_option("--n", spec.n)->capture_default_str();
  gen->add_option("--dim", spec.dim)->capture_default_str();
  gen->add_option("--ps", spec.p_s, "E(S)")->capture_default_str();
  gen->add_option("--p0", spec.p0, "E(Yhat|S=0)")->capture_default_str();
  gen->add_option("--p1", spec.p1, "E(Yhat|S=1)")->capture_default_str();
  gen->add_option("--cube-side", spec.cube_side)->capture_default_str();
  gen->add_option("--label-noise", spec.label_noise)->capture_default_str();
  gen->add_option("--out-csv", gen_out)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "fit the classifier on a CSV");
  std::string train_in, model_out = "model.txt", predictions_out;
  fa::MlpConfig mlp;
  std::string hidden = "8";
  train->add_option("--in", train_in)->required();
  train->add_option("--model-out", model_out)->capture_default_str();
  train->add_option("--hidden", hidden, "comma-separated widths");
  train->add_option("--epochs", mlp.epochs)->capture_default_str();
  train->add_option("--lr", mlp.learning_rate)->capture_default_str();
  train->add_option("--batch", mlp.batch_size)->capture_default_str();
  train->add_option("--predictions-out", predictions_out,
                    "write the dataset with model Yhat/logits attached");

  // fairwash
  auto* wash = app.add_subcommand("fairwash", "manipulate a dataset");
  std::string wash_method = "matching", wash_in, wash_out = "q_t.csv";
  std::string wash_model, movelog_out;
  double target_di = 0.8;
  int replace_speed = 1;
  wash->add_option("--method", wash_method,
                   "entropic_b|entropic_p|grad_b|grad_p|grad_b_1d|grad_p_1d|"
                   "replace|matching|matching_eoo")
      ->capture_default_str();
  wash->add_option("--target-di", target_di)->capture_default_str();
  wash->add_option("--in", wash_in)->required();
  wash->add_option("--out-csv", wash_out)->capture_default_str();
  wash->add_option("--model", wash_model, "model file (grad methods, KS)");
  wash->add_option("--movelog", movelog_out, "write the move log CSV");
  wash->add_option("--speed", replace_speed, "replace individuals per step");

  // audit
  auto* audit = app.add_subcommand("audit", "run the seven-test battery");
  std::string audit_sample, audit_reference, audit_model, audit_json;
  fa::AuditConfig audit_cfg;
  std::string fractions = "0.1,0.2";
  bool skip_ks = false;
  audit->add_option("--sample", audit_sample,
                    "manipulated distribution CSV (weight column = reweighted)")
      ->required();
  audit->add_option("--reference", audit_reference, "authority's full data")
      ->required();
  audit->add_option("--model", audit_model);
  audit->add_option("--alpha", audit_cfg.alpha)->capture_default_str();
  audit->add_option("--n-ref", audit_cfg.n_ref)->capture_default_str();
  audit->add_option("--max-tries", audit_cfg.max_tries)->capture_default_str();
  audit->add_option("--fractions", fractions)->capture_default_str();
  audit->add_flag("--two-sided", audit_cfg.two_sided);
  audit->add_flag("--skip-ks", skip_ks, "drop the KS test (no logits)");
  audit->add_option("--json-out", audit_json, "write the JSON report here");

  // search
  auto* search = app.add_subcommand("search",
                                    "highest undetected DI over a grid");
  std::string search_method = "matching", search_in, search_model;
  std::string grid_arg;
  fa::AuditConfig search_cfg;
  std::string search_fractions = "0.1,0.2";
  search->add_option("--method", search_method)->capture_default_str();
  search->add_option("--in", search_in)->required();
  search->add_option("--model", search_model);
  search->add_option("--grid", grid_arg, "comma-separated ascending targets");
  search->add_option("--fractions", search_fractions)->capture_default_str();
  search->add_option("--max-tries", search_cfg.search_max_tries)
      ->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "full experiment bundle");
  bool rep_svg = false;
  rep->add_flag("--svg", rep_svg, "emit SVG line charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage text
    return 1;
  }

  auto parse_list = [](const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(std::stod(tok));
    }
    return out;
  };

  try {
    auto schema_of = [&](const std::string& path) {
      return schema_for(path, s_col, yhat_col, y_col, logit_col);
    };

    if (gen->parsed()) {
      std::mt19937_64 rng(seed);
      fa::save_csv(gen_out, fa::gen_synthetic(spec, rng));
      std::cout << "wrote " << gen_out << " (n=" << spec.n
                << ", implied DI=" << spec.implied_di() << ")\n";
      return 0;
    }

    if (train->parsed()) {
      mlp.hidden.clear();
      for (double w : parse_list(hidden)) mlp.hidden.push_back(static_cast<int>(w));
      fa::Dataset data = fa::load_csv(train_in, schema_of(train_in));
      std::mt19937_64 rng(seed);
      fa::FitReport fit_report;
      fa::Classifier model = fa::fit(data, mlp, rng, &fit_report);
      const Eigen::VectorXd logits = model.predict_logits(data.X);
      model.set_threshold(
          std::clamp(fa::select_threshold(logits, *data.Y), 1e-6, 1.0 - 1e-6));
      model.save(model_out);
      std::cout << "trained: loss=" << fit_report.final_loss
                << " accuracy=" << fit_report.accuracy
                << " threshold=" << model.threshold() << '\n';
      if (!predictions_out.empty()) {
        fa::save_csv(predictions_out, fa::attach_predictions(data, model));
      }
      return 0;
    }

    if (wash->parsed()) {
      fa::Dataset data = fa::load_csv(wash_in, schema_of(wash_in));
      std::unique_ptr<fa::Classifier> model;
      if (!wash_model.empty()) {
        model = std::make_unique<fa::Classifier>(
            fa::Classifier::load(wash_model));
      }
      fa::MethodOptions opts;
      opts.replace_speed = replace_speed;
      opts.match.seed = seed;
      const fa::ManipulationResult result = fa::apply_method(
          fa::parse_method(wash_method), data, model.get(), target_di, opts);
      if (const auto* w =
              std::get_if<fa::WeightedDistribution>(&result.output)) {
        fa::save_csv(wash_out, *w);
      } else {
        fa::save_csv(wash_out, std::get<fa::Dataset>(result.output));
      }
      if (!movelog_out.empty()) {
        fa::save_move_log_csv(movelog_out, result.moves);
      }
      std::cout << "method=" << result.method
                << " achieved_di=" << result.achieved_di
                << " moves=" << result.moves.size() << " -> " << wash_out
                << '\n';
      return 0;
    }

    if (audit->parsed()) {
      audit_cfg.sample_fractions = parse_list(fractions);
      audit_cfg.seed = seed;
      if (skip_ks) {
        std::erase(audit_cfg.statistics, fa::Statistic::ks_yhat);
      }
      fa::Dataset reference =
          fa::load_csv(audit_reference, schema_of(audit_reference));
      fa::Distribution sample =
          load_distribution(audit_sample, schema_of(audit_sample));
      std::unique_ptr<fa::Classifier> model;
      if (!audit_model.empty()) {
        model = std::make_unique<fa::Classifier>(
            fa::Classifier::load(audit_model));
      }
      const fa::BatteryReport report =
          fa::run_battery(sample, reference, model.get(), audit_cfg);
      const std::string json = fa::battery_to_json(report);
      if (!audit_json.empty()) {
        std::ofstream os(audit_json);
        os << json << '\n';
      }
      std::cout << json << '\n' << fa::battery_to_text(report);
      return 0;
    }

    if (search->parsed()) {
      search_cfg.sample_fractions = parse_list(search_fractions);
      search_cfg.seed = seed;
      fa::Dataset reference =
          fa::load_csv(search_in, schema_of(search_in));
      std::unique_ptr<fa::Classifier> model;
      if (!search_model.empty()) {
        model = std::make_unique<fa::Classifier>(
            fa::Classifier::load(search_model));
      }
      const double di0 = fa::disparate_impact(reference);
      std::vector<double> grid = parse_list(grid_arg);
      if (grid.empty()) {
        for (int k = 0; k < 6; ++k) grid.push_back(di0 + 0.05 + 0.06 * k);
      }
      fa::Auditor auditor(reference, model.get(), search_cfg);
      const fa::MethodId method = fa::parse_method(search_method);
      fa::MethodOptions opts;
      opts.match.seed = seed;
      auto generate = [&](double target) -> fa::Distribution {
        return fa::apply_method(method, reference, model.get(), target, opts)
            .output;
      };
      const fa::SearchReport report = fa::search_highest_undetected(
          auditor, generate, grid, fa::method_name(method));
      std::cout << "method=" << report.method << " original_di=" << di0 << '\n';
      for (std::size_t f = 0; f < report.fractions.size(); ++f) {
        std::cout << "fraction " << report.fractions[f] << ": best undetected ";
        if (std::isnan(report.best_undetected[f])) {
          std::cout << "--";
        } else {
          std::cout << report.best_undetected[f];
        }
        std::cout << '\n';
      }
      return 0;
    }

    if (rep->parsed()) {
      fa::ExperimentConfig cfg;
      if (!config_path.empty()) {
        cfg = fa::config_from_json_file(config_path);
      }
      if (seed != 0) cfg.seed = seed;
      if (out_dir != "out") cfg.out_dir = out_dir;
      cfg.emit_svg = cfg.emit_svg || rep_svg;
      const fa::ExperimentReport report = fa::run_experiment(cfg);
      fa::write_report_bundle(report, cfg);
      std::cout << "reference DI=" << report.reference_di << ", bundle in "
                << cfg.out_dir << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
