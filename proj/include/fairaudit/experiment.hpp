#pragma once

#include "fairaudit/audit.hpp"
#include "fairaudit/csv.hpp"
#include "fairaudit/methods.hpp"
#include "fairaudit/synthetic.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fairaudit {

/// End-to-end experiment: build (or load) data, train the classifier,
/// manipulate per method and target, measure distances, audit, and search
/// for the highest undetected DI.
struct ExperimentConfig {
  int version = 1;
  std::optional<SyntheticSpec> synthetic = SyntheticSpec{};
  std::optional<std::string> csv_path;
  CsvSchema schema;
  MlpConfig model;
  std::vector<MethodId> methods = all_methods();
  std::vector<double> di_grid;  // defaults to 6 evenly spaced targets
  AuditConfig audit;
  MethodOptions method_options;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int workers = 2;
  bool emit_svg = false;
  bool run_battery = true;
  bool run_search = true;
};

ExperimentConfig config_from_json_file(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

/// Distribution-level shift metrics between Q_t and Q_n.
struct ShiftMetrics {
  double w_xsy = 0.0;
  double w_sy = 0.0;
  double kl_xsy = 0.0;
  double kl_sy = 0.0;
  double mmd_xsy = 0.0;
  double mmd_sy = 0.0;
};

struct CellResult {
  MethodId method = MethodId::replace;
  double target_di = 0.0;
  bool ok = false;
  std::string error;
  double achieved_di = 0.0;
  std::size_t moves = 0;
  ShiftMetrics metrics;
  BatteryReport battery;
};

struct ExperimentReport {
  Dataset reference;  // audited data with model predictions attached
  double reference_di = 0.0;
  FitReport fit;
  std::vector<double> di_grid;
  std::vector<CellResult> cells;          // method-major, grid-minor order
  std::vector<SearchReport> searches;     // one per method
};

/// Replaces Yhat and logits by the model's own predictions so the audited
/// decision and the white-box methods agree.
Dataset attach_predictions(const Dataset& data, const Classifier& model);

ShiftMetrics shift_metrics(const Distribution& manipulated,
                           const Dataset& reference);

ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes the report bundle (curve and radar CSVs, battery JSON and text,
/// search summary, manifest, optional SVG charts) into config.out_dir.
void write_report_bundle(const ExperimentReport& report,
                         const ExperimentConfig& config);

}  // namespace fairaudit
