#include "fairaudit/methods.hpp"

#include "fairaudit/entropic.hpp"

#include <stdexcept>

namespace fairaudit {

const char* method_name(MethodId id) {
  switch (id) {
    case MethodId::entropic_b: return "Entropic_b";
    case MethodId::entropic_p: return "Entropic_p";
    case MethodId::grad_b: return "Grad_b";
    case MethodId::grad_p: return "Grad_p";
    case MethodId::grad_b_1d: return "Grad_b_1D";
    case MethodId::grad_p_1d: return "Grad_p_1D";
    case MethodId::replace: return "Replace";
    case MethodId::matching: return "Matching";
    case MethodId::matching_eoo: return "Matching_EoO";
  }
  return "?";
}

MethodId parse_method(const std::string& name) {
  std::string low;
  for (char c : name) {
    low += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  for (MethodId id : all_methods()) {
    std::string canon;
    for (const char* p = method_name(id); *p; ++p) {
      canon += (*p >= 'A' && *p <= 'Z') ? static_cast<char>(*p - 'A' + 'a') : *p;
    }
    if (low == canon) return id;
  }
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::vector<MethodId> all_methods() {
  return {MethodId::entropic_b, MethodId::entropic_p, MethodId::grad_b,
          MethodId::grad_p,     MethodId::grad_b_1d,  MethodId::grad_p_1d,
          MethodId::replace,    MethodId::matching,   MethodId::matching_eoo};
}

ManipulationResult apply_method(MethodId id, const Dataset& data,
                                const Classifier* model, double target_di,
                                const MethodOptions& options) {
  switch (id) {
    case MethodId::entropic_b:
    case MethodId::entropic_p: {
      const SplitMode mode = id == MethodId::entropic_b
                                 ? SplitMode::balanced
                                 : SplitMode::proportional;
      ManipulationResult r;
      r.method = method_name(id);
      r.output = fairwash_entropic(data, target_di, mode);
      r.achieved_di = disparate_impact(r.output);
      return r;
    }
    case MethodId::grad_b:
    case MethodId::grad_p:
    case MethodId::grad_b_1d:
    case MethodId::grad_p_1d: {
      if (!model) {
        throw std::invalid_argument(
            "gradient projection is a white-box method and needs the model");
      }
      ProjectionConfig cfg = options.grad;
      cfg.target_di = target_di;
      cfg.mode = (id == MethodId::grad_b || id == MethodId::grad_b_1d)
                     ? SplitMode::balanced
                     : SplitMode::proportional;
      cfg.variant_1d = id == MethodId::grad_b_1d || id == MethodId::grad_p_1d;
      ManipulationResult r = fairwash_grad(data, *model, cfg);
      r.method = method_name(id);
      return r;
    }
    case MethodId::replace: {
      ManipulationResult r =
          replace_greedy(data, target_di, options.replace_speed);
      r.method = method_name(id);
      return r;
    }
    case MethodId::matching: {
      ManipulationResult r = match_greedy(
          data, target_di, MatchObjective::disparate_impact, options.match);
      r.method = method_name(id);
      return r;
    }
    case MethodId::matching_eoo: {
      const double eoo_target =
          options.eoo_target.value_or(std::max(0.0, 1.0 - target_di));
      ManipulationResult r = match_greedy(
          data, eoo_target, MatchObjective::equality_of_odds, options.match);
      r.method = method_name(id);
      return r;
    }
  }
  throw std::logic_error("unknown method");
}

}  // namespace fairaudit
