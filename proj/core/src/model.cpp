#include "unibound/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace unibound {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& msg) { throw Error("model: " + msg); }

std::string class_label(const TransitionClass& c, std::size_t idx) {
  std::ostringstream os;
  os << "class ";
  if (c.name.empty()) {
    os << "#" << idx;
  } else {
    os << "'" << c.name << "'";
  }
  return os.str();
}

}  // namespace

int StateFactor::degree() const {
  int d = 0;
  for (int e : exponents) d += e;
  return d;
}

double StateFactor::operator()(const StateVec& x) const {
  double v = constant;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    for (int e = 0; e < exponents[k]; ++e) v *= static_cast<double>(x[k]);
  }
  return v;
}

bool TransitionClass::enabled(const StateVec& x) const {
  for (std::size_t k = 0; k < guard.size(); ++k) {
    if (x[k] < guard[k].min) return false;
    if (guard[k].max && x[k] > *guard[k].max) return false;
  }
  return true;
}

bool TransitionClass::lower_bounds_hold(const StateVec& x) const {
  for (std::size_t k = 0; k < guard.size(); ++k) {
    if (x[k] < guard[k].min) return false;
  }
  return true;
}

namespace detail {

void finalize_model(ModelSpec& spec) {
  const std::size_t n = spec.dim();
  if (n == 0) fail("at least one species is required");
  {
    std::unordered_set<std::string> seen;
    for (const auto& s : spec.species) {
      if (s.empty()) fail("species names must be non-empty");
      if (!seen.insert(s).second) fail("duplicate species name '" + s + "'");
    }
  }
  if (!(spec.horizon >= 0.0) || !std::isfinite(spec.horizon)) {
    fail("horizon must be a finite non-negative number");
  }

  if (spec.initial.empty()) fail("initial distribution must be non-empty");
  {
    NeumaierSum total;
    std::unordered_set<StateVec, StateVecHash> seen;
    for (const auto& [x, p] : spec.initial) {
      if (x.size() != n) fail("initial state has wrong dimension");
      for (Count c : x) {
        if (c < 0) fail("initial state has a negative population count");
      }
      if (!(p > 0.0)) fail("initial probabilities must be positive");
      if (!seen.insert(x).second) fail("duplicate state in initial distribution");
      total.add(p);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "initial probabilities sum to " << total.value()
         << ", expected 1 within 1e-12";
      fail(os.str());
    }
  }

  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    TransitionClass& c = spec.classes[j];
    const std::string label = class_label(c, j);
    if (c.guard.size() != n) fail(label + ": guard has wrong dimension");
    if (c.change.size() != n) fail(label + ": change vector has wrong dimension");
    if (c.state_factor.exponents.size() != n) {
      fail(label + ": exponents vector has wrong dimension");
    }

    bool any_change = false;
    for (std::size_t k = 0; k < n; ++k) {
      const GuardBound& g = c.guard[k];
      if (g.min < 0) fail(label + ": guard minimum for '" + spec.species[k] + "' is negative");
      if (g.max && *g.max < g.min) {
        fail(label + ": guard for '" + spec.species[k] + "' has max below min");
      }
      if (c.change[k] != 0) any_change = true;
      // Closure: every state satisfying the guard must map to a valid state.
      if (g.min + c.change[k] < 0) {
        std::ostringstream os;
        os << label << " violates closure: species '" << spec.species[k]
           << "' may go negative (guard min " << g.min << ", change "
           << c.change[k] << ")";
        fail(os.str());
      }
      if (c.state_factor.exponents[k] < 0) {
        fail(label + ": monomial exponents must be non-negative");
      }
    }
    if (!any_change) fail(label + ": change vector is all zero");

    if (!(c.state_factor.constant > 0.0)) {
      fail(label + ": rate constant must be positive");
    }

    TimeFactor& tf = c.time_factor;
    if (tf.kind == TimeFactor::Kind::constant) {
      if (tf.b != 0.0) fail(label + ": constant time factor with non-zero slope");
      tf.valid_until = kInf;
      if (!(tf.a > 0.0)) fail(label + ": time factor must be positive");
    } else {
      if (!(tf.valid_until > 0.0)) {
        fail(label + ": affine time factor needs a positive valid_until");
      }
      // Affine positivity on [0, valid_until] is decided at the endpoints.
      if (!(tf.a > 0.0) ||
          (std::isfinite(tf.valid_until) && !(tf.a + tf.b * tf.valid_until > 0.0)) ||
          (!std::isfinite(tf.valid_until) && tf.b < 0.0)) {
        fail(label + ": time factor must stay positive on [0, valid_until]");
      }
    }
    if (tf.valid_until < spec.horizon) {
      std::ostringstream os;
      os << label << ": time factor valid only to " << tf.valid_until
         << " but horizon is " << spec.horizon;
      fail(os.str());
    }
  }

  // Reject exact duplicates (same guard, change, and rate). Classes may share
  // a change vector with different guards or rates: the exclusive switch
  // produces each protein both from the free and from the bound promoter.
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      const TransitionClass& a = spec.classes[i];
      const TransitionClass& b = spec.classes[j];
      if (a.change != b.change) continue;
      bool same_guard = true;
      for (std::size_t k = 0; k < n; ++k) {
        if (a.guard[k].min != b.guard[k].min || a.guard[k].max != b.guard[k].max) {
          same_guard = false;
          break;
        }
      }
      if (same_guard && a.state_factor.constant == b.state_factor.constant &&
          a.state_factor.exponents == b.state_factor.exponents &&
          a.time_factor.kind == b.time_factor.kind && a.time_factor.a == b.time_factor.a &&
          a.time_factor.b == b.time_factor.b) {
        fail(class_label(b, j) + " duplicates " + class_label(a, i));
      }
    }
  }

  // Per-species reachable upper bounds: if every count-raising class carries
  // a finite guard maximum for the species, no reachable state can exceed
  // max(initial, guard max + change). Used to clamp dominating states.
  spec.dim_cap.assign(n, std::nullopt);
  for (std::size_t k = 0; k < n; ++k) {
    Count cap = 0;
    for (const auto& [x, p] : spec.initial) cap = std::max(cap, x[k]);
    bool bounded = true;
    for (const TransitionClass& c : spec.classes) {
      if (c.change[k] <= 0) continue;
      if (!c.guard[k].max) {
        bounded = false;
        break;
      }
      cap = std::max(cap, *c.guard[k].max + c.change[k]);
    }
    if (bounded) spec.dim_cap[k] = cap;
  }
}

}  // namespace detail

namespace {

ModelSpec parse_json(const json& doc) {
  if (!doc.is_object()) fail("document root must be an object");
  for (const char* key : {"species", "horizon", "initial", "classes"}) {
    if (!doc.contains(key)) fail(std::string("missing top-level key '") + key + "'");
  }

  ModelSpec spec;
  if (!doc["species"].is_array() || doc["species"].empty()) {
    fail("'species' must be a non-empty array of names");
  }
  std::unordered_map<std::string, std::size_t> species_index;
  for (const auto& s : doc["species"]) {
    if (!s.is_string()) fail("'species' entries must be strings");
    species_index.emplace(s.get<std::string>(), spec.species.size());
    spec.species.push_back(s.get<std::string>());
  }
  const std::size_t n = spec.species.size();

  if (!doc["horizon"].is_number()) fail("'horizon' must be a number (seconds)");
  spec.horizon = doc["horizon"].get<double>();

  if (!doc["initial"].is_array()) fail("'initial' must be an array");
  for (const auto& entry : doc["initial"]) {
    if (!entry.is_object() || !entry.contains("state") || !entry.contains("prob")) {
      fail("'initial' entries must be objects with 'state' and 'prob'");
    }
    StateVec x;
    for (const auto& v : entry["state"]) {
      if (!v.is_number_integer()) fail("'initial' states must be integer arrays");
      x.push_back(v.get<Count>());
    }
    spec.initial.emplace_back(std::move(x), entry["prob"].get<double>());
  }

  if (!doc["classes"].is_array()) fail("'classes' must be an array");
  for (const auto& cj : doc["classes"]) {
    TransitionClass c;
    c.name = cj.value("name", "");
    c.guard.assign(n, GuardBound{});

    if (cj.contains("guard")) {
      if (!cj["guard"].is_array()) fail("'guard' must be an array of bounds");
      for (const auto& gj : cj["guard"]) {
        if (!gj.is_object() || !gj.contains("var")) {
          fail("guard entries must be objects with 'var'");
        }
        auto it = species_index.find(gj["var"].get<std::string>());
        if (it == species_index.end()) {
          fail("guard references unknown species '" + gj["var"].get<std::string>() + "'");
        }
        GuardBound& g = c.guard[it->second];
        if (gj.contains("min")) g.min = gj["min"].get<Count>();
        if (gj.contains("max") && !gj["max"].is_null()) g.max = gj["max"].get<Count>();
      }
    }

    if (!cj.contains("change") || !cj["change"].is_array()) {
      fail("class '" + c.name + "' needs a 'change' integer array");
    }
    for (const auto& v : cj["change"]) c.change.push_back(v.get<Count>());

    if (!cj.contains("rate") || !cj["rate"].is_object()) {
      fail("class '" + c.name + "' needs a 'rate' object");
    }
    const json& rj = cj["rate"];
    if (!rj.contains("constant") || !rj.contains("exponents")) {
      fail("class '" + c.name + "': rate needs 'constant' and 'exponents'");
    }
    c.state_factor.constant = rj["constant"].get<double>();
    for (const auto& v : rj["exponents"]) c.state_factor.exponents.push_back(v.get<int>());

    if (rj.contains("time")) {
      const json& tj = rj["time"];
      const std::string kind = tj.value("kind", "constant");
      if (kind == "constant") {
        c.time_factor.kind = TimeFactor::Kind::constant;
      } else if (kind == "affine") {
        c.time_factor.kind = TimeFactor::Kind::affine;
      } else {
        fail("class '" + c.name + "': time factor kind must be 'constant' or 'affine'");
      }
      c.time_factor.a = tj.value("a", 1.0);
      c.time_factor.b = tj.value("b", 0.0);
      c.time_factor.valid_until = tj.contains("valid_until")
                                      ? tj["valid_until"].get<double>()
                                      : kInf;
    } else {
      c.time_factor = TimeFactor{};  // constant 1
    }

    spec.classes.push_back(std::move(c));
  }

  detail::finalize_model(spec);
  return spec;
}

}  // namespace

ModelSpec parse_model(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
  try {
    return parse_json(doc);
  } catch (const json::exception& e) {
    fail(std::string("schema violation: ") + e.what());
  }
}

namespace {

TransitionClass make_class(std::string name, std::size_t n,
                           std::vector<std::pair<std::size_t, GuardBound>> guard,
                           std::vector<std::pair<std::size_t, Count>> change,
                           double constant, std::vector<std::pair<std::size_t, int>> expo,
                           TimeFactor tf = TimeFactor{}) {
  TransitionClass c;
  c.name = std::move(name);
  c.guard.assign(n, GuardBound{});
  for (auto& [k, g] : guard) c.guard[k] = g;
  c.change.assign(n, 0);
  for (auto& [k, w] : change) c.change[k] = w;
  c.state_factor.constant = constant;
  c.state_factor.exponents.assign(n, 0);
  for (auto& [k, e] : expo) c.state_factor.exponents[k] = e;
  c.time_factor = tf;
  return c;
}

// Two species (mRNA, protein). Transcription scales with a linearly growing
// cell volume V(t) = 1 + t/3600 (volume doubles over the horizon). The rate
// constants are documented defaults chosen to keep desk-scale runs in the
// thousands of states; override them via a model file if needed.
ModelSpec build_gene_expression() {
  constexpr double k1 = 0.05;   // transcription (per volume unit)
  constexpr double k2 = 0.05;   // translation, per mRNA
  constexpr double k3 = 0.005;  // mRNA degradation
  constexpr double k4 = 0.0005; // protein degradation
  const std::size_t n = 2;
  const std::size_t M = 0, P = 1;

  ModelSpec spec;
  spec.species = {"mrna", "protein"};
  spec.horizon = 3600.0;
  spec.initial = {{StateVec{0, 0}, 1.0}};

  TimeFactor volume;
  volume.kind = TimeFactor::Kind::affine;
  volume.a = 1.0;
  volume.b = 1.0 / 3600.0;
  volume.valid_until = kInf;  // grows but stays positive forever

  spec.classes.push_back(make_class("transcription", n, {}, {{M, +1}}, k1, {}, volume));
  spec.classes.push_back(
      make_class("translation", n, {{M, {1, {}}}}, {{P, +1}}, k2, {{M, 1}}));
  spec.classes.push_back(
      make_class("mrna_degradation", n, {{M, {1, {}}}}, {{M, -1}}, k3, {{M, 1}}));
  spec.classes.push_back(
      make_class("protein_degradation", n, {{P, {1, {}}}}, {{P, -1}}, k4, {{P, 1}}));

  detail::finalize_model(spec);
  return spec;
}

// Five species (p1, p2, free promoter d, bound complexes d.p1, d.p2). The two
// products compete for a single promoter site; binding strength decays as the
// cell volume grows. Promoter occupancy guards carry explicit upper bounds
// that are redundant on the reachable set (d + d.p1 + d.p2 = 1) but let the
// per-species caps for the occupancy dimensions be derived from the guards.
ModelSpec build_exclusive_switch() {
  constexpr double production = 0.5;
  constexpr double degradation = 0.005;
  constexpr double binding = 0.1;
  constexpr double unbinding = 0.005;
  const std::size_t n = 5;
  const std::size_t D = 2;

  ModelSpec spec;
  spec.species = {"p1", "p2", "d", "d.p1", "d.p2"};
  spec.horizon = 3600.0;
  spec.initial = {{StateVec{0, 0, 1, 0, 0}, 1.0}};

  TimeFactor decay;
  decay.kind = TimeFactor::Kind::affine;
  decay.a = 1.0;
  decay.b = -0.05 / 3600.0 / 0.1;  // 0.1 - (0.05/3600) t == 0.1 (1 - t/7200)
  decay.valid_until = 3600.0;

  for (std::size_t j = 0; j < 2; ++j) {
    const std::string p = j == 0 ? "p1" : "p2";
    const std::size_t DP = D + 1 + j;  // d.p1 or d.p2
    spec.classes.push_back(make_class("production_" + p, n, {{D, {1, {}}}},
                                      {{j, +1}}, production, {{D, 1}}));
    spec.classes.push_back(make_class("degradation_" + p, n, {{j, {1, {}}}},
                                      {{j, -1}}, degradation, {{j, 1}}));
    spec.classes.push_back(make_class(
        "binding_" + p, n, {{j, {1, {}}}, {D, {1, {}}}, {DP, {0, 0}}},
        {{j, -1}, {D, -1}, {DP, +1}}, binding, {{j, 1}, {D, 1}}, decay));
    spec.classes.push_back(make_class("unbinding_" + p, n,
                                      {{DP, {1, {}}}, {D, {0, 0}}},
                                      {{j, +1}, {D, +1}, {DP, -1}}, unbinding,
                                      {{DP, 1}}));
    spec.classes.push_back(make_class("production_bound_" + p, n,
                                      {{DP, {1, {}}}}, {{j, +1}}, production,
                                      {{DP, 1}}));
  }

  detail::finalize_model(spec);
  return spec;
}

}  // namespace

ModelSpec builtin_model(const std::string& name) {
  if (name == "gene_expression") return build_gene_expression();
  if (name == "exclusive_switch") return build_exclusive_switch();
  fail("unknown builtin model '" + name + "'");
}

std::vector<std::size_t> enabled_classes(const ModelSpec& spec, const StateVec& x) {
  if (x.size() != spec.dim()) fail("state has wrong dimension");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    if (spec.classes[j].enabled(x)) out.push_back(j);
  }
  return out;
}

double rate(const ModelSpec& spec, std::size_t j, const StateVec& x, double t) {
  if (j >= spec.classes.size()) fail("class index out of range");
  if (x.size() != spec.dim()) fail("state has wrong dimension");
  const TransitionClass& c = spec.classes[j];
  if (t > c.time_factor.valid_until) {
    std::ostringstream os;
    os << class_label(c, j) << ": rate requested at t=" << t
       << " beyond valid_until=" << c.time_factor.valid_until;
    fail(os.str());
  }
  if (!c.enabled(x)) return 0.0;
  return c.time_factor(t) * c.state_factor(x);
}

double exit_rate(const ModelSpec& spec, const StateVec& x, double t) {
  double total = 0.0;
  for (std::size_t j = 0; j < spec.classes.size(); ++j) {
    const TransitionClass& c = spec.classes[j];
    if (c.enabled(x)) total += c.time_factor(t) * c.state_factor(x);
  }
  return total;
}

}  // namespace unibound
