#include "fairaudit/audit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace fairaudit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd raw_records(const Dataset& data) {
  Eigen::MatrixXd out(data.rows(), data.dim() + 2);
  out.leftCols(data.dim()) = data.X;
  out.col(data.dim()) = data.S.cast<double>();
  out.col(data.dim() + 1) = data.Yhat.cast<double>();
  return out;
}

Eigen::VectorXd uniform(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

}  // namespace

const char* statistic_name(Statistic stat) {
  switch (stat) {
    case Statistic::kl_xsy: return "KL(X,S,Yhat)";
    case Statistic::kl_sy: return "KL(S,Yhat)";
    case Statistic::w_xsy: return "W(X,S,Yhat)";
    case Statistic::w_sy: return "W(S,Yhat)";
    case Statistic::ks_yhat: return "KS(Yhat)";
    case Statistic::mmd_xsy: return "MMD(X,S,Yhat)";
    case Statistic::mmd_sy: return "MMD(S,Yhat)";
  }
  return "?";
}

std::vector<Statistic> all_statistics() {
  return {Statistic::kl_xsy, Statistic::kl_sy,  Statistic::w_xsy,
          Statistic::w_sy,   Statistic::ks_yhat, Statistic::mmd_xsy,
          Statistic::mmd_sy};
}

struct Auditor::Impl {
  Dataset reference;
  const Classifier* model = nullptr;
  AuditConfig cfg;

  Standardizer standardizer;
  Eigen::MatrixXd ref_embed;   // standardized records for W / MMD
  Eigen::MatrixXd ref_raw;     // raw records for the exact-match KL
  Eigen::VectorXd ref_weights;
  Eigen::Vector4d ref_hist;
  Eigen::VectorXd ref_logits;  // empty when unavailable
  double bandwidth_xsy = 1.0;
  double bandwidth_sy = 1.0;
  double ref_self_kernel = 0.0;  // reference MMD self term, fixed bandwidth

  std::map<std::tuple<Statistic, int, bool>, std::vector<double>> nulls;
  std::mutex nulls_mu;

  Impl(Dataset ref, const Classifier* mdl, AuditConfig config)
      : reference(std::move(ref)), model(mdl), cfg(std::move(config)) {
    reference.validate();
    standardizer = Standardizer::fit(reference);
    ref_embed = embed_records(reference, standardizer);
    ref_raw = raw_records(reference);
    ref_weights = uniform(reference.rows());
    ref_hist = sy_histogram(reference);
    if (model) {
      ref_logits = model->predict_logits(reference.X);
    } else if (reference.logits) {
      ref_logits = *reference.logits;
    }
    bandwidth_xsy = median_pairwise_distance(ref_embed);
    Eigen::MatrixXd corners(4, 2);
    corners << 0, 0, 0, 1, 1, 0, 1, 1;
    bandwidth_sy = median_pairwise_distance(corners);
    ref_self_kernel = gaussian_kernel_sum(ref_embed, ref_weights, ref_embed,
                                          ref_weights, bandwidth_xsy);
  }

  Eigen::VectorXd sample_logits(const Dataset& sample) const {
    if (model) return model->predict_logits(sample.X);
    if (sample.logits) return *sample.logits;
    throw std::runtime_error(
        "KS statistic undefined: no model and no stored logits");
  }

  double evaluate(Statistic stat, const Dataset& sample) const {
    switch (stat) {
      case Statistic::kl_xsy:
        return kl_atoms(raw_records(sample), uniform(sample.rows()), ref_raw,
                        ref_weights);
      case Statistic::kl_sy:
        return kl_sy(sy_histogram(sample), ref_hist);
      case Statistic::w_xsy: {
        auto [w2, plan] = wasserstein_exact(
            embed_records(sample, standardizer), uniform(sample.rows()),
            ref_embed, ref_weights);
        return w2;
      }
      case Statistic::w_sy:
        return wasserstein_sy(sy_histogram(sample), ref_hist);
      case Statistic::ks_yhat: {
        if (ref_logits.size() == 0) {
          throw std::runtime_error(
              "KS statistic undefined: reference has no logits");
        }
        return ks_two_sample(sample_logits(sample), ref_logits).statistic;
      }
      case Statistic::mmd_xsy: {
        // the reference self term is cached; only the sample-dependent
        // kernel sums are computed per call
        const Eigen::MatrixXd se = embed_records(sample, standardizer);
        const Eigen::VectorXd sw = uniform(sample.rows());
        const double pp = gaussian_kernel_sum(se, sw, se, sw, bandwidth_xsy);
        const double pq =
            gaussian_kernel_sum(se, sw, ref_embed, ref_weights, bandwidth_xsy);
        return std::max(0.0, pp + ref_self_kernel - 2.0 * pq);
      }
      case Statistic::mmd_sy: {
        Eigen::MatrixXd corners(4, 2);
        corners << 0, 0, 0, 1, 1, 0, 1, 1;
        return mmd2(corners, sy_histogram(sample), corners, ref_hist,
                    KernelSpec::fixed(bandwidth_sy));
      }
    }
    throw std::logic_error("unknown statistic");
  }

  TestOutcome judge_ks(const Dataset& sample) const {
    TestOutcome out;
    out.stat = Statistic::ks_yhat;
    out.name = statistic_name(Statistic::ks_yhat);
    if (ref_logits.size() == 0) {
      throw std::runtime_error(
          "KS statistic undefined: reference has no logits");
    }
    const KsResult ks = ks_two_sample(sample_logits(sample), ref_logits);
    out.observed = ks.statistic;
    out.p_proxy = ks.p_value;
    out.null_lower = 0.0;
    out.null_upper = 1.0;
    out.reject = ks.p_value < cfg.alpha;
    return out;
  }

  const std::vector<double>& null_table(Statistic stat, int sample_size,
                                        bool with_replacement) {
    const auto key = std::make_tuple(stat, sample_size, with_replacement);
    // The map only grows and nodes are stable, so holding the lock across
    // the (expensive) build also serializes duplicate requests.
    std::lock_guard<std::mutex> lock(nulls_mu);
    auto it = nulls.find(key);
    if (it != nulls.end()) return it->second;

    std::vector<double> values(static_cast<std::size_t>(cfg.n_ref));
    const double fraction =
        static_cast<double>(sample_size) / static_cast<double>(reference.rows());
    const std::uint64_t base = mix_seed(
        cfg.seed, 0x9100u + static_cast<std::uint64_t>(stat) * 1024 +
                      static_cast<std::uint64_t>(sample_size) * 2 +
                      (with_replacement ? 1 : 0));

    // Draws are independent tasks; seeding by draw index keeps the merged
    // table identical for any worker count.
    const int workers = std::max(1, cfg.threads);
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&](int w) {
      try {
        for (int b = w; b < cfg.n_ref; b += workers) {
          std::mt19937_64 rng(mix_seed(base, static_cast<std::uint64_t>(b)));
          const Dataset draw =
              sample_fraction(reference, fraction, rng, with_replacement);
          values[static_cast<std::size_t>(b)] = evaluate(stat, draw);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    };
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    std::sort(values.begin(), values.end());
    return nulls.emplace(key, std::move(values)).first->second;
  }
};

namespace {

TestOutcome judge(Statistic stat, double observed,
                  const std::vector<double>& nulls, double alpha,
                  bool two_sided) {
  TestOutcome out;
  out.stat = stat;
  out.name = statistic_name(stat);
  out.observed = observed;
  if (stat == Statistic::ks_yhat) {
    throw std::logic_error("KS outcomes use their own p-value rule");
  }
  if (nulls.empty()) throw std::invalid_argument("empty null table");
  const int b = static_cast<int>(nulls.size());
  auto order_stat = [&](double q) {
    const int k = std::clamp(static_cast<int>(std::ceil(q * b)), 1, b);
    return nulls[static_cast<std::size_t>(k - 1)];
  };
  if (two_sided) {
    out.null_lower = order_stat(alpha / 2.0);
    out.null_upper = order_stat(1.0 - alpha / 2.0);
  } else {
    out.null_lower = -kInf;
    out.null_upper = order_stat(1.0 - alpha);
  }
  // Closed acceptance region: boundary values are accepted. An infinite
  // observed statistic always rejects.
  out.reject = observed == kInf || observed > out.null_upper ||
               observed < out.null_lower;
  int ge = 0;
  for (double v : nulls) ge += v >= observed ? 1 : 0;
  out.p_proxy = static_cast<double>(1 + ge) / static_cast<double>(b + 1);
  return out;
}

}  // namespace

Auditor::Auditor(Dataset reference, const Classifier* model, AuditConfig config)
    : impl_(std::make_unique<Impl>(std::move(reference), model,
                                   std::move(config))) {}

Auditor::~Auditor() = default;
Auditor::Auditor(Auditor&&) noexcept = default;
Auditor& Auditor::operator=(Auditor&&) noexcept = default;

const AuditConfig& Auditor::config() const { return impl_->cfg; }
const Dataset& Auditor::reference() const { return impl_->reference; }

double Auditor::evaluate(Statistic stat, const Dataset& sample) const {
  return impl_->evaluate(stat, sample);
}

const std::vector<double>& Auditor::null_table(Statistic stat, int sample_size,
                                               bool with_replacement) {
  return impl_->null_table(stat, sample_size, with_replacement);
}

TestOutcome Auditor::test_sample(const Dataset& sample, Statistic stat,
                                 int sample_size, bool with_replacement) {
  if (stat == Statistic::ks_yhat) {
    return impl_->judge_ks(sample);
  }
  const auto& nulls = null_table(stat, sample_size, with_replacement);
  return judge(stat, impl_->evaluate(stat, sample), nulls, impl_->cfg.alpha,
               impl_->cfg.two_sided);
}

TestOutcome Auditor::test_with_nulls(const Dataset& sample, Statistic stat,
                                     const std::vector<double>& nulls) const {
  if (stat == Statistic::ks_yhat) {
    return impl_->judge_ks(sample);
  }
  return judge(stat, impl_->evaluate(stat, sample), nulls, impl_->cfg.alpha,
               impl_->cfg.two_sided);
}

BatteryOutcome Auditor::run_battery_at(const Distribution& manipulated,
                                       double fraction, int max_tries,
                                       bool early_stop) {
  early_stop = early_stop || impl_->cfg.early_stop;
  const Dataset& base = base_of(manipulated);
  const bool with_replacement = is_weighted(manipulated);
  const int sample_size = static_cast<int>(
      std::llround(fraction * static_cast<double>(base.rows())));

  BatteryOutcome outcome;
  outcome.fraction = fraction;
  outcome.sample_size = sample_size;
  outcome.ever_accepted.assign(impl_->cfg.statistics.size(), false);

  // Null tables are built eagerly so every try reuses them.
  for (Statistic stat : impl_->cfg.statistics) {
    if (stat != Statistic::ks_yhat) {
      null_table(stat, sample_size, with_replacement);
    }
  }

  const std::uint64_t base_seed = mix_seed(
      impl_->cfg.seed,
      0xba77u + static_cast<std::uint64_t>(std::llround(fraction * 1e6)));
  for (int attempt = 1; attempt <= max_tries; ++attempt) {
    std::mt19937_64 rng(mix_seed(base_seed, static_cast<std::uint64_t>(attempt)));
    Dataset sample;
    if (const auto* w = std::get_if<WeightedDistribution>(&manipulated)) {
      sample = sample_fraction(*w, fraction, rng, true);
    } else {
      sample = sample_fraction(std::get<Dataset>(manipulated), fraction, rng,
                               false);
    }

    std::vector<TestOutcome> tests;
    bool all_accept = true;
    for (std::size_t s = 0; s < impl_->cfg.statistics.size(); ++s) {
      const Statistic stat = impl_->cfg.statistics[s];
      if (early_stop && !all_accept) {
        TestOutcome skipped;
        skipped.stat = stat;
        skipped.name = statistic_name(stat);
        skipped.evaluated = false;
        tests.push_back(skipped);
        continue;
      }
      TestOutcome t = test_sample(sample, stat, sample_size, with_replacement);
      if (!t.reject) outcome.ever_accepted[s] = true;
      all_accept = all_accept && !t.reject;
      tests.push_back(std::move(t));
    }

    outcome.tests = std::move(tests);
    outcome.tries_used = attempt;
    if (all_accept) {
      outcome.passed = true;
      break;
    }
  }
  return outcome;
}

BatteryReport Auditor::run_battery(const Distribution& manipulated) {
  const AuditConfig& cfg = impl_->cfg;
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1)");
  }
  if (cfg.n_ref < 50) {
    throw std::invalid_argument("battery needs at least 50 reference draws");
  }
  for (double f : cfg.sample_fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::invalid_argument("sample fractions must lie in (0,1]");
    }
  }
  BatteryReport report;
  for (double f : cfg.sample_fractions) {
    report.fractions.push_back(run_battery_at(manipulated, f, cfg.max_tries));
  }
  return report;
}

std::vector<double> null_distribution(const Dataset& reference, Statistic stat,
                                      int sample_size, int draws,
                                      std::mt19937_64& rng,
                                      const Classifier* model,
                                      bool with_replacement) {
  if (sample_size < 1 || sample_size > reference.rows()) {
    throw std::invalid_argument("sample size out of range");
  }
  AuditConfig cfg;
  cfg.n_ref = draws;
  cfg.seed = rng();  // consume one word so callers can chain deterministically
  Auditor auditor(reference, model, cfg);
  return auditor.null_table(stat, sample_size, with_replacement);
}

TestOutcome test_sample(const Dataset& sample, const Dataset& reference,
                        Statistic stat, const std::vector<double>& null_values,
                        double alpha, const Classifier* model,
                        bool two_sided) {
  AuditConfig cfg;
  cfg.alpha = alpha;
  cfg.two_sided = two_sided;
  Auditor auditor(reference, model, cfg);
  return auditor.test_with_nulls(sample, stat, null_values);
}

BatteryReport run_battery(const Distribution& manipulated,
                          const Dataset& reference, const Classifier* model,
                          const AuditConfig& config) {
  Auditor auditor(reference, model, config);
  return auditor.run_battery(manipulated);
}

SearchReport search_highest_undetected(
    Auditor& auditor,
    const std::function<Distribution(double target_di)>& generate,
    const std::vector<double>& di_grid, const std::string& method_label) {
  if (di_grid.empty()) throw std::invalid_argument("empty DI grid");
  if (!std::is_sorted(di_grid.begin(), di_grid.end())) {
    throw std::invalid_argument("DI grid must be ascending");
  }
  const double di0 = disparate_impact(auditor.reference());
  if (di_grid.front() <= di0) {
    throw std::invalid_argument("DI grid must start above the reference DI");
  }

  const AuditConfig& cfg = auditor.config();
  SearchReport report;
  report.method = method_label;
  report.fractions = cfg.sample_fractions;
  report.by_fraction.resize(cfg.sample_fractions.size());
  report.best_undetected.assign(cfg.sample_fractions.size(),
                                std::numeric_limits<double>::quiet_NaN());

  for (double target : di_grid) {
    SearchGridPoint base_point;
    base_point.target_di = target;
    std::optional<Distribution> manipulated;
    try {
      manipulated = generate(target);
      base_point.generated = true;
      base_point.achieved_di = disparate_impact(*manipulated);
    } catch (const std::exception& e) {
      base_point.error = e.what();
    }
    for (std::size_t f = 0; f < cfg.sample_fractions.size(); ++f) {
      SearchGridPoint point = base_point;
      if (manipulated) {
        const BatteryOutcome outcome =
            auditor.run_battery_at(*manipulated, cfg.sample_fractions[f],
                                   cfg.search_max_tries, /*early_stop=*/true);
        point.passed = outcome.passed;
        point.tries = outcome.tries_used;
        if (point.passed) report.best_undetected[f] = target;
      }
      report.by_fraction[f].push_back(point);
    }
  }
  return report;
}

std::string battery_to_json(const BatteryReport& report) {
  nlohmann::json j;
  j["fractions"] = nlohmann::json::array();
  for (const auto& f : report.fractions) {
    nlohmann::json jf;
    jf["fraction"] = f.fraction;
    jf["sample_size"] = f.sample_size;
    jf["passed"] = f.passed;
    jf["tries_used"] = f.tries_used;
    jf["tests"] = nlohmann::json::array();
    for (std::size_t s = 0; s < f.tests.size(); ++s) {
      const auto& t = f.tests[s];
      nlohmann::json jt;
      jt["name"] = t.name;
      jt["evaluated"] = t.evaluated;
      jt["observed"] = t.observed == kInf ? "inf" : nlohmann::json(t.observed);
      jt["null_lower"] =
          t.null_lower == -kInf ? "-inf" : nlohmann::json(t.null_lower);
      jt["null_upper"] = t.null_upper;
      jt["reject"] = t.reject;
      jt["p_proxy"] = t.p_proxy;
      jt["ever_accepted"] = s < f.ever_accepted.size() && f.ever_accepted[s];
      jf["tests"].push_back(jt);
    }
    j["fractions"].push_back(jf);
  }
  return j.dump(2);
}

std::string battery_to_text(const BatteryReport& report) {
  std::ostringstream os;
  os << "test             ";
  for (const auto& f : report.fractions) {
    os << "  pass@" << static_cast<int>(std::lround(f.fraction * 100)) << '%';
  }
  os << "  symbol\n";
  const std::size_t tests =
      report.fractions.empty() ? 0 : report.fractions.front().tests.size();
  for (std::size_t s = 0; s < tests; ++s) {
    std::string name = report.fractions.front().tests[s].name;
    name.resize(17, ' ');
    os << name;
    std::vector<bool> acc;
    for (const auto& f : report.fractions) {
      const bool a = s < f.ever_accepted.size() && f.ever_accepted[s];
      acc.push_back(a);
      os << "  " << (a ? "yes" : " no") << "   ";
    }
    char symbol = 'x';
    if (!acc.empty() && acc.back()) {
      symbol = std::all_of(acc.begin(), acc.end(), [](bool a) { return a; })
                   ? '-'
                   : 'o';
    }
    os << "   " << symbol << '\n';
  }
  for (const auto& f : report.fractions) {
    os << "battery@" << static_cast<int>(std::lround(f.fraction * 100))
       << "%: " << (f.passed ? "undetected" : "detected") << " after "
       << f.tries_used << (f.tries_used == 1 ? " try" : " tries") << '\n';
  }
  os << "symbols: '-' accepted at every fraction, 'o' accepted only at the "
        "largest, 'x' rejected\n";
  return os.str();
}

}  // namespace fairaudit
