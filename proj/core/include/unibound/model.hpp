#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unibound/types.hpp"

namespace unibound {

// ============================================================================
// Markov population models with transition-class structure.
//
// A model is a set of species and a list of transition classes. Each class
// has a guard (a conjunction of per-species bounds), an integer change
// vector, and a separable propensity
//
//     alpha_j(x, t) = lambda_j(t) * r_j(x)
//
// where lambda_j is affine in t and r_j is a positive constant times a
// monomial in the populations. This restricted shape is what makes the
// adaptive uniformization machinery exact: affine time factors integrate in
// closed form and monomial state factors are monotone, so a componentwise
// upper-bound state yields a dominating exit rate.
// ============================================================================

/// Time-dependent factor lambda(t) = a + b*t, valid on [0, valid_until].
struct TimeFactor {
  enum class Kind { constant, affine };

  Kind kind = Kind::constant;
  double a = 1.0;
  double b = 0.0;
  double valid_until = 0.0;

  double operator()(double t) const { return a + b * t; }

  /// Exact integral over [t0, t1].
  double integral(double t0, double t1) const {
    double d = t1 - t0;
    return d * (a + b * (t0 + 0.5 * d));
  }
};

/// State-dependent factor r(x) = constant * prod_k x_k^{e_k}.
struct StateFactor {
  double constant = 1.0;
  std::vector<int> exponents;

  int degree() const;
  double operator()(const StateVec& x) const;
};

/// Per-species guard bounds. A state satisfies the guard when every species
/// count lies in [min, max] (max absent = unbounded above).
struct GuardBound {
  Count min = 0;
  std::optional<Count> max;
};

struct TransitionClass {
  std::string name;
  std::vector<GuardBound> guard;  // one entry per species
  StateVec change;                // non-zero, pairwise distinct across classes
  StateFactor state_factor;
  TimeFactor time_factor;

  bool enabled(const StateVec& x) const;

  /// Guard check ignoring upper bounds. Lower bounds are up-closed (if x
  /// satisfies them, so does any y >= x), which is what makes the exit rate
  /// of a componentwise maximum dominate a whole window of states.
  bool lower_bounds_hold(const StateVec& x) const;
};

struct ModelSpec {
  std::vector<std::string> species;
  double horizon = 0.0;
  std::vector<std::pair<StateVec, double>> initial;
  std::vector<TransitionClass> classes;

  /// Reachable per-species upper bound implied by the guards: finite for
  /// species where every count-raising class carries a finite guard maximum
  /// (e.g. promoter occupancy bits). Derived during validation.
  std::vector<std::optional<Count>> dim_cap;

  std::size_t dim() const { return species.size(); }
};

/// Parses and validates a model from JSON text. Throws Error with a message
/// naming the offending field or class on any schema or semantic violation:
/// guard/change closure failures, duplicate change vectors, non-normalized
/// initial distributions, non-positive time factors, or factor validity
/// ending before the horizon.
ModelSpec parse_model(const std::string& json_text);

/// Returns a ready-made model by name: "gene_expression" (two species,
/// volume-scaled transcription) or "exclusive_switch" (five species, two
/// proteins competing for one promoter, decaying binding strength).
ModelSpec builtin_model(const std::string& name);

/// Indices of classes whose guard holds at x, in class order.
std::vector<std::size_t> enabled_classes(const ModelSpec& spec, const StateVec& x);

/// alpha_j(x, t); zero when the guard fails. Throws when t exceeds the
/// class's valid_until or x has the wrong dimension.
double rate(const ModelSpec& spec, std::size_t j, const StateVec& x, double t);

/// Sum of all enabled class rates at (x, t).
double exit_rate(const ModelSpec& spec, const StateVec& x, double t);

namespace detail {
/// Validation shared by parse_model and builtin_model; fills dim_cap.
void finalize_model(ModelSpec& spec);
}  // namespace detail

}  // namespace unibound
