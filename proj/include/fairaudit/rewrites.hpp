#pragma once

#include "fairaudit/dataset.hpp"
#include "fairaudit/manipulation.hpp"

#include <cstdint>

namespace fairaudit {

/// Greedy rewrite of (S, Yhat) over the four bins: at each step the
/// admissible bin move with the largest DI improvement is applied to `speed`
/// individuals at once (lowest row index first, for reproducibility).
/// Admissible moves, written as (yhat, s) pairs:
///   (0,0)->(1,0)   flip an s=0 negative to positive
///   (1,1)->(1,0)   relabel an s=1 positive into group 0
///   (0,0)->(0,1)   relabel an s=0 negative into group 1 (rarely optimal,
///                  kept in the candidate set and left to the argmax)
/// Terminates with DI >= t or throws when no admissible move increases DI.
ManipulationResult replace_greedy(const Dataset& data, double t, int speed = 1);

enum class MatchObjective { disparate_impact, equality_of_odds };

struct MatchOptions {
  /// When positive and n exceeds 5000, each step scores only this many
  /// randomly chosen donor rows instead of all n.
  int subsample_donors = 0;
  std::uint64_t seed = 0;
};

/// Recursive matching: each step replaces one row's full record by a copy of
/// another existing row, choosing the pair with the best objective gain per
/// unit L2 displacement of the (X, S, Yhat) record. Zero-displacement
/// positive-gain candidates rank first. Stops at DI >= t, or EoO <= t for
/// the equality-of-odds objective. The manipulated support stays inside the
/// original atom set.
ManipulationResult match_greedy(const Dataset& data, double t,
                                MatchObjective objective,
                                const MatchOptions& options = {});

/// Additive equality of odds |P(Yhat=1|S=1,Y=1) - P(Yhat=1|S=0,Y=1)|.
/// Throws when either Y=1 stratum is empty.
double equality_of_odds(const Dataset& data);

}  // namespace fairaudit
