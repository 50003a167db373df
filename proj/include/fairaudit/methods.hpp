#pragma once

#include "fairaudit/dataset.hpp"
#include "fairaudit/manipulation.hpp"
#include "fairaudit/model.hpp"
#include "fairaudit/ot_projection.hpp"
#include "fairaudit/rewrites.hpp"

#include <optional>
#include <string>

namespace fairaudit {

/// The fair-washing methods by their experiment nicknames.
enum class MethodId {
  entropic_b,
  entropic_p,
  grad_b,
  grad_p,
  grad_b_1d,
  grad_p_1d,
  replace,
  matching,
  matching_eoo,
};

const char* method_name(MethodId id);
MethodId parse_method(const std::string& name);
std::vector<MethodId> all_methods();

struct MethodOptions {
  ProjectionConfig grad;     // target_di/mode/variant are overridden per call
  int replace_speed = 1;
  MatchOptions match;
  /// EoO ceiling for matching_eoo; defaults to 1 - target_di.
  std::optional<double> eoo_target;
};

/// Runs one method toward the target DI. Gradient variants require a model;
/// matching_eoo reads the EoO target from the options.
ManipulationResult apply_method(MethodId id, const Dataset& data,
                                const Classifier* model, double target_di,
                                const MethodOptions& options = {});

}  // namespace fairaudit
