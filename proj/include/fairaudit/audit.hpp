#pragma once

#include "fairaudit/dataset.hpp"
#include "fairaudit/divergences.hpp"
#include "fairaudit/model.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fairaudit {

/// The seven battery statistics, in the fixed reporting order.
enum class Statistic {
  kl_xsy,
  kl_sy,
  w_xsy,
  w_sy,
  ks_yhat,
  mmd_xsy,
  mmd_sy,
};

const char* statistic_name(Statistic stat);
std::vector<Statistic> all_statistics();

struct AuditConfig {
  double alpha = 0.05;
  int n_ref = 200;  // bootstrap reference draws per null table
  std::vector<double> sample_fractions = {0.10, 0.20};
  int max_tries = 30;         // battery pass/fail
  int search_max_tries = 100; // highest-undetected search
  std::vector<Statistic> statistics = all_statistics();
  std::uint64_t seed = 0;
  bool two_sided = false;  // distance tests default to one-sided upper
  bool early_stop = false; // stop a try at its first rejection
  int threads = 2;         // worker count for bootstrap draws
};

struct TestOutcome {
  Statistic stat = Statistic::kl_xsy;
  std::string name;
  double observed = 0.0;
  double null_lower = 0.0;  // acceptance region (closed)
  double null_upper = 0.0;
  bool reject = false;
  double p_proxy = 1.0;  // rank of observed among null values; KS: its p-value
  bool evaluated = true;
};

/// One fraction's battery run: the recorded outcomes are the first fully
/// accepted sample's, or the last rejected sample's when every try failed.
struct BatteryOutcome {
  double fraction = 0.0;
  int sample_size = 0;
  bool passed = false;
  int tries_used = 0;
  std::vector<TestOutcome> tests;
  std::vector<bool> ever_accepted;  // per enabled statistic, over all tries
};

struct BatteryReport {
  std::vector<BatteryOutcome> fractions;
};

/// Precomputes reference-side structures (standardizer, embeddings, kernel
/// bandwidths, logits) and caches null tables per (statistic, sample size,
/// sampling mechanism). Reusable across batteries against one reference.
class Auditor {
 public:
  Auditor(Dataset reference, const Classifier* model, AuditConfig config);
  ~Auditor();
  Auditor(Auditor&&) noexcept;
  Auditor& operator=(Auditor&&) noexcept;

  const AuditConfig& config() const;
  const Dataset& reference() const;

  /// d(sample, reference) for one statistic.
  double evaluate(Statistic stat, const Dataset& sample) const;

  /// Sorted null values for the statistic at this sample size. Draws are
  /// subsamples of the reference, matched to the mechanism the auditee is
  /// expected to use (with replacement mirrors sampling from a reweighted
  /// distribution).
  const std::vector<double>& null_table(Statistic stat, int sample_size,
                                        bool with_replacement);

  TestOutcome test_sample(const Dataset& sample, Statistic stat,
                          int sample_size, bool with_replacement);

  /// Same decision rule against a caller-supplied null table (KS keeps its
  /// own p-value rule and ignores the table).
  TestOutcome test_with_nulls(const Dataset& sample, Statistic stat,
                              const std::vector<double>& nulls) const;

  /// Draws up to max_tries samples at each configured fraction and accepts
  /// as soon as one sample passes every enabled test.
  BatteryReport run_battery(const Distribution& manipulated);
  BatteryOutcome run_battery_at(const Distribution& manipulated,
                                double fraction, int max_tries,
                                bool early_stop = false);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Free-standing one-shot wrappers over Auditor.
std::vector<double> null_distribution(const Dataset& reference, Statistic stat,
                                      int sample_size, int draws,
                                      std::mt19937_64& rng,
                                      const Classifier* model = nullptr,
                                      bool with_replacement = false);

TestOutcome test_sample(const Dataset& sample, const Dataset& reference,
                        Statistic stat, const std::vector<double>& null_values,
                        double alpha, const Classifier* model = nullptr,
                        bool two_sided = false);

BatteryReport run_battery(const Distribution& manipulated,
                          const Dataset& reference, const Classifier* model,
                          const AuditConfig& config);

struct SearchGridPoint {
  double target_di = 0.0;
  bool generated = false;
  std::string error;  // generation failure, recorded and skipped
  double achieved_di = 0.0;
  bool passed = false;
  int tries = 0;
};

struct SearchReport {
  std::string method;
  std::vector<double> fractions;
  std::vector<std::vector<SearchGridPoint>> by_fraction;  // [fraction][grid]
  std::vector<double> best_undetected;  // per fraction; NaN when none passed
};

/// Scans an ascending DI grid: each target is manipulated once via
/// `generate` and the battery runs with the search try budget and
/// first-rejection short-circuiting; reports the largest undetected target
/// per sample fraction. Grid points the method cannot reach are recorded as
/// failures and the scan continues.
SearchReport search_highest_undetected(
    Auditor& auditor,
    const std::function<Distribution(double target_di)>& generate,
    const std::vector<double>& di_grid, const std::string& method_label);

std::string battery_to_json(const BatteryReport& report);

/// Aligned text table with the per-test symbols: '-' accepted at both
/// fractions, 'o' accepted only at the larger one, 'x' rejected at both.
std::string battery_to_text(const BatteryReport& report);

}  // namespace fairaudit
