// Copyright 2026 The dncprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dncprep/bounds.hpp"
#include "dncprep/entanglement.hpp"
#include "dncprep/fermion.hpp"
#include "dncprep/io.hpp"
#include "dncprep/prep.hpp"
#include "dncprep/tree.hpp"

namespace dncprep {

/// Malformed or out-of-range experiment configuration.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline constexpr int kMaxCurveHeight = 4;

struct TfimModel {
  OperatorSum op;
  std::vector<Span> leaf_spans;
};

/// h sum_i Z_i + J sum_i X_i X_{i+1} on 2^p qubits, open boundary, one qubit per leaf.
inline TfimModel build_tfim(int p, double h, double j) {
  require(p >= 0 && (1 << std::min(p, 8)) <= dncprep::detail::kMaxStatevectorQubits,
          "TFIM height p must lie in [0, 4]");
  require(std::isfinite(h) && std::isfinite(j), "TFIM couplings must be finite");
  const int n = 1 << p;
  std::vector<PauliTerm> ts;
  for (int i = 0; i < n; ++i) ts.emplace_back(h, std::vector<PauliFactor>{{i, PauliAxis::Z}});
  for (int i = 0; i + 1 < n; ++i)
    ts.emplace_back(j, std::vector<PauliFactor>{{i, PauliAxis::X}, {i + 1, PauliAxis::X}});
  return {OperatorSum(n, std::move(ts)), even_spans(n, p)};
}

struct NaiveOverlapRow {
  int p = 0;
  double overlap = 1.0;
  /// Ground level of the 2^p-spin chain is degenerate.
  bool flagged = false;
};

struct NodeValue {
  NodeLabel label;
  double value = 0.0;
  bool degenerate = false;
};

struct LayerOverlapRow {
  int p = 0;
  double min_overlap = 1.0;
  std::vector<NodeValue> nodes;
  bool flagged = false;
};

struct GapRow {
  int p = 0;
  double gamma = 0.0;
  bool degenerate = false;
  double interaction_norm = 0.0;
};

struct OverlapCurves {
  double h = 1.0;
  double j = 1.0;
  std::vector<NaiveOverlapRow> naive;
  std::vector<LayerOverlapRow> layer;
  std::vector<GapRow> gaps;
};

/// All curve data for p = 0..p_max from one tree of height p_max. The nodes at
/// depth p_max - p are open chains of 2^p spins, so each row reads off that level.
inline OverlapCurves overlap_curves(int p_max, double h, double j, const EigenOptions& opts = {}) {
  require(p_max >= 0 && p_max <= kMaxCurveHeight, "p_max must lie in [0, 4]");
  const TfimModel m = build_tfim(p_max, h, j);
  const TreeSpectra sp(decompose(m.op, m.leaf_spans, p_max), opts, false);
  const HamiltonianTree& tree = sp.tree();
  OverlapCurves out;
  out.h = h;
  out.j = j;
  for (int p = 0; p <= p_max; ++p) {
    const int depth = p_max - p;
    const NodeLabel first = NodeLabel::from_index(depth, 0);
    const NodeSpectrum& ns = sp.node(first);

    NaiveOverlapRow naive{p, 1.0, ns.degenerate};
    if (p > 0) {
      std::optional<StateVector> product;
      for (const auto& l : sp.subtree(first))
        if (tree.is_leaf(l)) {
          const StateVector& g = sp.node(l).ground;
          product = product ? tensor(*product, g) : g;
          naive.flagged = naive.flagged || sp.node(l).degenerate;
        }
      naive.overlap = std::min(1.0, overlap_abs(ns.ground, *product));
    }
    out.naive.push_back(naive);

    LayerOverlapRow layer{p, 1.0, {}, false};
    if (p > 0) {
      for (std::uint64_t i = 0; i < (std::uint64_t{1} << depth); ++i) {
        const NodeLabel s = NodeLabel::from_index(depth, i);
        const NodeSpectrum& n = sp.node(s);
        const bool degenerate =
            n.degenerate || sp.node(s.child(0)).degenerate || sp.node(s.child(1)).degenerate;
        layer.nodes.push_back({s, n.child_overlap, degenerate});
        layer.min_overlap = std::min(layer.min_overlap, n.child_overlap);
        layer.flagged = layer.flagged || degenerate;
      }
    }
    out.layer.push_back(std::move(layer));

    GapRow g{p, ns.gap, ns.degenerate, 0.0};
    if (p > 0) g.interaction_norm = spectral_norm(node_operator(tree, first), opts);
    out.gaps.push_back(g);
  }
  return out;
}

inline std::vector<NaiveOverlapRow> naive_overlap_curve(int p_max, double h, double j) {
  return overlap_curves(p_max, h, j).naive;
}

inline std::vector<LayerOverlapRow> layer_overlap_curve(int p_max, double h, double j) {
  return overlap_curves(p_max, h, j).layer;
}

inline std::vector<GapRow> gap_interaction_curve(int p_max, double h, double j) {
  return overlap_curves(p_max, h, j).gaps;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares y = slope x + intercept.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "linear fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

/// ln(naive overlap) against N = 2^p over the rows p >= p_from.
inline LinearFit naive_overlap_fit(const std::vector<NaiveOverlapRow>& rows, int p_from = 0) {
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (r.p >= p_from) {
      x.push_back(std::ldexp(1.0, r.p));
      y.push_back(std::log(r.overlap));
    }
  return linear_fit(x, y);
}

// ---------------------------------------------------------------------------
// Configuration

enum class Experiment { TreeInfo, Prepare, BoundsSweep, FigureOverlaps, FigureGaps, Entropy, JwCheck };

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::TreeInfo, "tree-info"},         {Experiment::Prepare, "prepare"},
      {Experiment::BoundsSweep, "bounds-sweep"},   {Experiment::FigureOverlaps, "figure-overlaps"},
      {Experiment::FigureGaps, "figure-gaps"},     {Experiment::Entropy, "entropy"},
      {Experiment::JwCheck, "jw-check"}};
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, v] : experiment_names())
    if (k == e) return v;
  return "unknown";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (const auto& [k, v] : experiment_names())
    if (v == s) return k;
  throw ConfigError("unknown experiment \"" + s + "\"");
}

struct ModelConfig {
  std::string type = "tfim";  // "tfim" or "operator-file"
  int p = 1;
  double h = 1.0;
  double j = 1.0;
  std::string path;
  std::vector<Span> spans;
};

struct EngineConfig {
  double delta = 0.1;
  QpeModel qpe;
  std::string r_lb_mode = "measured";  // or "fixed"
  double r_lb_value = 0.0;
  std::uint64_t master_seed = 1;
  std::uint64_t n_runs = 10000;
  bool unbounded_retries = false;
};

struct OutputConfig {
  std::string csv_path;
  std::string report_path;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Prepare;
  ModelConfig model;
  EngineConfig engine;
  OutputConfig output;
  int p_max = kMaxCurveHeight;
};

/// Throws ConfigError on the first violated field constraint.
inline void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.model.type == "tfim") {
    if (c.model.p < 0 || c.model.p > kMaxCurveHeight) fail("model.p must lie in [0, 4]");
    if (!std::isfinite(c.model.h) || !std::isfinite(c.model.j)) fail("model.h and model.J must be finite");
  } else if (c.model.type == "operator-file") {
    if (c.model.path.empty()) fail("model.path is required for operator-file models");
    if (c.model.spans.empty()) fail("model.spans is required for operator-file models");
  } else {
    fail("model.type must be \"tfim\" or \"operator-file\"");
  }
  if (!(c.engine.delta > 0.0 && c.engine.delta < 1.0)) fail("engine.delta must lie in (0, 1)");
  if (!(c.engine.qpe.c_qpe > 0.0) || !std::isfinite(c.engine.qpe.c_qpe)) fail("engine.c_qpe must be positive");
  if (c.engine.r_lb_mode == "fixed") {
    if (!(c.engine.r_lb_value > 0.0 && c.engine.r_lb_value <= 1.0)) fail("engine.r_lb_value must lie in (0, 1]");
  } else if (c.engine.r_lb_mode != "measured") {
    fail("engine.r_lb_mode must be \"measured\" or \"fixed\"");
  }
  if (c.engine.n_runs < 1) fail("engine.n_runs must be at least 1");
  if (c.p_max < 0 || c.p_max > kMaxCurveHeight) fail("p_max must lie in [0, 4]");
}

namespace detail {

inline void reject_unknown(const io::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void read_field(const io::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const io::json& v = j[key];
  const std::string name = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name + " must be a boolean");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(name + " must be a string");
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ConfigError(name + " must be a nonnegative integer");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(name + " must be an integer");
  } else {
    if (!v.is_number()) throw ConfigError(name + " must be a number");
  }
  out = v.get<T>();
}

}  // namespace detail

/// Parses a config document; relative model paths resolve against base_dir.
inline ExperimentConfig config_from_json(const io::json& j, const std::string& base_dir = {}) {
  ExperimentConfig c;
  detail::reject_unknown(j, {"experiment", "model", "engine", "output", "p_max"}, "config");
  if (j.contains("experiment")) {
    if (!j["experiment"].is_string()) throw ConfigError("config.experiment must be a string");
    c.experiment = experiment_from_string(j["experiment"].get<std::string>());
  }
  detail::read_field(j, "p_max", c.p_max, "config");
  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::reject_unknown(m, {"type", "p", "h", "J", "path", "spans"}, "model");
    detail::read_field(m, "type", c.model.type, "model");
    detail::read_field(m, "p", c.model.p, "model");
    detail::read_field(m, "h", c.model.h, "model");
    detail::read_field(m, "J", c.model.j, "model");
    detail::read_field(m, "path", c.model.path, "model");
    if (!c.model.path.empty() && !base_dir.empty() && std::filesystem::path(c.model.path).is_relative())
      c.model.path = (std::filesystem::path(base_dir) / c.model.path).string();
    if (m.contains("spans")) {
      try {
        c.model.spans = io::spans_from_json(m["spans"], "model.spans");
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (j.contains("engine")) {
    const auto& e = j["engine"];
    detail::reject_unknown(e,
                           {"delta", "qpe_model", "c_qpe", "r_lb_mode", "r_lb_value", "master_seed", "n_runs",
                            "unbounded_retries"},
                           "engine");
    detail::read_field(e, "delta", c.engine.delta, "engine");
    if (e.contains("qpe_model")) {
      std::string k;
      detail::read_field(e, "qpe_model", k, "engine");
      try {
        c.engine.qpe.kind = qpe_kind_from_string(k);
      } catch (const InvalidArgument& err) {
        throw ConfigError(err.what());
      }
    }
    detail::read_field(e, "c_qpe", c.engine.qpe.c_qpe, "engine");
    detail::read_field(e, "r_lb_mode", c.engine.r_lb_mode, "engine");
    detail::read_field(e, "r_lb_value", c.engine.r_lb_value, "engine");
    if (e.contains("r_lb_value") && !e.contains("r_lb_mode")) c.engine.r_lb_mode = "fixed";
    detail::read_field(e, "master_seed", c.engine.master_seed, "engine");
    detail::read_field(e, "n_runs", c.engine.n_runs, "engine");
    detail::read_field(e, "unbounded_retries", c.engine.unbounded_retries, "engine");
  }
  if (j.contains("output")) {
    const auto& o = j["output"];
    detail::reject_unknown(o, {"csv_path", "report_path"}, "output");
    detail::read_field(o, "csv_path", c.output.csv_path, "output");
    detail::read_field(o, "report_path", c.output.report_path, "output");
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  io::json j;
  try {
    j = io::read_json(path);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

inline io::json config_to_json(const ExperimentConfig& c) {
  io::json model = {{"type", c.model.type}};
  if (c.model.type == "tfim") {
    model["p"] = c.model.p;
    model["h"] = c.model.h;
    model["J"] = c.model.j;
  } else {
    model["path"] = c.model.path;
    model["spans"] = io::spans_to_json(c.model.spans);
  }
  io::json engine = {{"delta", c.engine.delta},
                     {"qpe_model", to_string(c.engine.qpe.kind)},
                     {"c_qpe", c.engine.qpe.c_qpe},
                     {"r_lb_mode", c.engine.r_lb_mode}};
  if (c.engine.r_lb_mode == "fixed") engine["r_lb_value"] = c.engine.r_lb_value;
  engine["master_seed"] = c.engine.master_seed;
  engine["n_runs"] = c.engine.n_runs;
  engine["unbounded_retries"] = c.engine.unbounded_retries;
  return {{"experiment", to_string(c.experiment)},
          {"model", model},
          {"engine", engine},
          {"output", {{"csv_path", c.output.csv_path}, {"report_path", c.output.report_path}}},
          {"p_max", c.p_max}};
}

// ---------------------------------------------------------------------------
// Experiments

struct InvariantCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ExperimentOutcome {
  Experiment experiment = Experiment::Prepare;
  io::CsvTable csv{{}};
  io::json report;
  std::vector<InvariantCheck> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline io::json checks_to_json(const std::vector<InvariantCheck>& checks) {
  io::json a = io::json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return a;
}

/// Operator and leaf spans named by the model section.
inline TfimModel load_model(const ModelConfig& m) {
  if (m.type == "tfim") return build_tfim(m.p, m.h, m.j);
  return {io::operator_from_json(io::read_json(m.path)), m.spans};
}

inline HamiltonianTree model_tree(const ModelConfig& m) {
  TfimModel model = load_model(m);
  const int p = io::height_for_leaves(model.leaf_spans.size());
  return decompose(model.op, model.leaf_spans, p);
}

namespace detail {

inline Matrix random_hermitian(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> g;
  Matrix a(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) a(r, c) = cplx(g(rng), g(rng));
  return (a + a.adjoint()) / 2.0;
}

inline Eigen::Index random_dim(std::mt19937_64& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline std::string node_list(const std::vector<NodeValue>& nodes) {
  std::string s;
  for (const auto& n : nodes) s += (s.empty() ? "" : " ") + n.label.str();
  return s;
}

}  // namespace detail

struct SweepSuite {
  std::string name;
  std::uint64_t instances = 0;
  std::uint64_t satisfied = 0;
  std::uint64_t violations() const { return instances - satisfied; }
};

/// Randomized checks of the perturbation bounds, seeded per suite from master_seed.
inline std::vector<SweepSuite> bounds_sweep(std::uint64_t master_seed) {
  std::vector<SweepSuite> out;
  auto stream = [master_seed](std::uint64_t suite) { return std::mt19937_64(mix64(master_seed ^ mix64(suite + 1))); };
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  {
    SweepSuite s{"budget-split"};
    auto rng = stream(0);
    for (int i = 0; i < 1000; ++i) {
      const double delta = unit(rng);
      const int n = 1 + static_cast<int>(rng() % 1000000);
      const auto c = budget_split_check(delta, n);
      ++s.instances;
      s.satisfied += c.lhs >= c.rhs - 1e-15;
    }
    out.push_back(s);
  }
  {
    SweepSuite s{"davis-kahan"};
    auto rng = stream(1);
    for (int i = 0; i < 200; ++i) {
      const Eigen::Index dim = detail::random_dim(rng, 2, 64);
      const Matrix a = detail::random_hermitian(rng, dim);
      const Matrix b = a + (0.001 + unit(rng)) * detail::random_hermitian(rng, dim);
      const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(dim));
      ++s.instances;
      s.satisfied += davis_kahan(a, b, j).satisfied;
    }
    out.push_back(s);
  }
  {
    SweepSuite s{"weyl"};
    auto rng = stream(2);
    for (int i = 0; i < 200; ++i) {
      const Eigen::Index dim = detail::random_dim(rng, 2, 64);
      const Matrix a = detail::random_hermitian(rng, dim);
      const Matrix b = a + unit(rng) * detail::random_hermitian(rng, dim);
      ++s.instances;
      s.satisfied += weyl_max_shift(a, b).satisfied;
    }
    out.push_back(s);
  }
  {
    SweepSuite s{"matrix-log"};
    auto rng = stream(3);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Index dim = detail::random_dim(rng, 2, 8);
      const Matrix h = detail::random_hermitian(rng, dim);
      const double t = 1.0 / (4.0 * operator_norm(h));
      const Matrix u = evolution(h, t);
      const auto ml = matrix_log(u, t);
      const Matrix hh = (ml.h_tilde + ml.h_tilde.adjoint()) / 2.0;
      ++s.instances;
      s.satisfied += operator_norm(evolution(hh, t) - u) <= 1e-10;
    }
    out.push_back(s);
  }
  {
    SweepSuite s{"effective-hamiltonian"};
    auto rng = stream(4);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Index dim = detail::random_dim(rng, 2, 8);
      Matrix h = detail::random_hermitian(rng, dim);
      h /= operator_norm(h);
      const double t = 0.25 * (1.0 - unit(rng));
      const double eps = 0.01 + unit(rng);
      const Matrix dir = detail::random_hermitian(rng, dim) + cplx(0.0, 1.0) * detail::random_hermitian(rng, dim);
      const double dist = unit(rng) * t * eps / 9.0;
      const auto rep = effective_error(h, unitary_at_distance(evolution(h, t), dir, dist), t, eps);
      ++s.instances;
      s.satisfied += rep.hypotheses_hold() && rep.within_epsilon;
    }
    out.push_back(s);
  }
  {
    SweepSuite s{"perturbed-overlap"};
    auto rng = stream(5);
    while (s.instances < 100) {
      const Eigen::Index dim = detail::random_dim(rng, 2, 64);
      const Matrix h0 = detail::random_hermitian(rng, dim);
      Eigen::SelfAdjointEigenSolver<Matrix> e0(h0);
      const double gamma0 = e0.eigenvalues()[1] - e0.eigenvalues()[0];
      if (gamma0 <= 0.2) continue;
      Matrix hint = detail::random_hermitian(rng, dim);
      hint *= unit(rng) * ((gamma0 - 0.1) / 2.0) / operator_norm(hint);
      const double hn = operator_norm(hint);
      if (!(gamma0 > 2.0 * hn + 0.1)) continue;
      Eigen::SelfAdjointEigenSolver<Matrix> e1(h0 + hint);
      const double ov = std::abs(e0.eigenvectors().col(0).dot(e1.eigenvectors().col(0)));
      ++s.instances;
      s.satisfied += ov * ov >= perturbed_overlap_lb(gamma0, hn).value - 1e-12;
    }
    out.push_back(s);
  }
  {
    SweepSuite s{"sufficient-conditions"};
    auto rng = stream(6);
    for (int i = 0; i < 100; ++i) {
      const int p = 1 + static_cast<int>(rng() % 6);
      const double gamma = 0.01 + 10.0 * unit(rng);
      const double c = kMinSufficiencyConstant * (1.0 + 1e-9) + 5.0 * unit(rng);
      std::vector<double> layers;
      for (int k = 0; k < p; ++k) layers.push_back(gamma / (4.0 * c * (p - k) * (p - k)));
      const auto r = sufficient_conditions(layers, gamma, c);
      ++s.instances;
      s.satisfied += r.all_i && r.all_ii && r.implication_holds;
    }
    out.push_back(s);
  }
  return out;
}

namespace detail {

inline ExperimentOutcome tree_info(const ExperimentConfig& cfg) {
  const HamiltonianTree tree = model_tree(cfg.model);
  const ValidationReport v = validate(tree);
  ExperimentOutcome out;
  out.csv = io::CsvTable({"node", "span_lo", "span_hi", "n_terms"});
  io::json nodes = io::json::object();
  for (const auto& s : tree.labels()) {
    const Span sp = tree.span(s);
    out.csv.add_row({s.str(), io::cell(sp.lo), io::cell(sp.hi), io::cell(std::uint64_t{tree.terms(s).size()})});
    io::json terms = io::json::array();
    for (const auto& t : tree.terms(s)) terms.push_back(t.to_string());
    nodes[s.str()] = {{"span", {sp.lo, sp.hi}}, {"terms", terms}};
  }
  io::json checks = io::json::array();
  for (const auto& c : v.checks) {
    io::json offending = io::json::array();
    for (const auto& t : c.offending)
      offending.push_back({{"node", t.node.str()}, {"position", t.position}, {"term", t.term}});
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"offending", offending}});
    out.checks.push_back({"tree-" + c.name, c.passed, c.detail});
  }
  out.report = {{"p", tree.p()},
                {"n_qubits", tree.n_qubits()},
                {"leaf_spans", io::spans_to_json(tree.leaf_spans())},
                {"nodes", nodes},
                {"tree_file", io::tree_to_json(tree)},
                {"validation", checks}};
  return out;
}

inline ExperimentOutcome prepare_runs(const ExperimentConfig& cfg) {
  const HamiltonianTree tree = model_tree(cfg.model);
  const ValidationReport v = validate(tree);
  ExperimentOutcome out;
  out.checks.push_back({"tree-valid", v.passed(), v.passed() ? "" : "tree decomposition failed validation"});
  const TreeSpectra sp(tree);
  MonteCarloConfig mc;
  mc.options.model = cfg.engine.qpe;
  mc.options.unbounded_retries = cfg.engine.unbounded_retries;
  mc.delta = cfg.engine.delta;
  if (cfg.engine.r_lb_mode == "fixed") mc.r_lb = cfg.engine.r_lb_value;
  mc.runs = cfg.engine.n_runs;
  mc.master_seed = cfg.engine.master_seed;
  const RunReport rep = run_monte_carlo(sp, mc);
  const double measured = sp.min_child_overlap(NodeLabel::root());

  const double sigma = std::sqrt(rep.delta * (1.0 - rep.delta) / static_cast<double>(rep.runs));
  const bool rate_ok = rep.failure_rate <= rep.delta + 3.0 * sigma;
  out.checks.push_back({"failure-rate", rate_ok,
                        "failure_rate " + format_double(rep.failure_rate) + " vs delta + 3 sigma " +
                            format_double(rep.delta + 3.0 * sigma)});
  if (!cfg.engine.unbounded_retries && rep.r_lb <= measured) {
    out.checks.push_back({"analytic-bounds", rep.bound_violations == 0,
                          std::to_string(rep.bound_violations) + " runs exceeded the analytic bounds"});
  }

  out.csv = io::CsvTable(
      {"model", "p", "delta", "failure_rate", "mean_N_V", "mean_N_U", "bound_N_V", "bound_N_U", "seed"});
  out.csv.add_row({to_string(rep.model.kind), io::cell(rep.p), io::cell(rep.delta), io::cell(rep.failure_rate),
                   io::cell(rep.mean_n_v), io::cell(rep.mean_n_u), io::cell(rep.bound_n_v), io::cell(rep.bound_n_u),
                   io::cell(rep.master_seed)});

  io::json nodes = io::json::object();
  for (const auto& s : tree.labels()) {
    const NodeSpectrum& n = sp.node(s);
    nodes[s.str()] = {{"energy", n.energy},     {"gap", n.gap},
                      {"degenerate", n.degenerate}, {"norm", n.norm},
                      {"child_overlap", n.child_overlap}, {"interaction_norm", n.interaction_norm}};
  }
  out.report = io::report_to_json(rep);
  out.report["measured_min_overlap"] = measured;
  out.report["failure_sigma"] = sigma;
  out.report["nodes"] = nodes;
  return out;
}

inline void require_tfim(const ExperimentConfig& cfg) {
  if (cfg.model.type != "tfim") throw ConfigError(to_string(cfg.experiment) + " needs a tfim model");
}

inline ExperimentOutcome figure_overlaps(const ExperimentConfig& cfg, const OverlapCurves& curves) {
  ExperimentOutcome out;
  out.csv = io::CsvTable({"p", "overlap_naive", "overlap_layer_min"});
  io::json rows = io::json::array();
  bool in_range = true, flagged = false;
  for (std::size_t i = 0; i < curves.naive.size(); ++i) {
    const auto& n = curves.naive[i];
    const auto& l = curves.layer[i];
    out.csv.add_row({io::cell(n.p), io::cell(n.overlap), io::cell(l.min_overlap)});
    io::json per_node = io::json::object();
    for (const auto& v : l.nodes) per_node[v.label.str()] = {{"overlap", v.value}, {"degenerate", v.degenerate}};
    rows.push_back({{"p", n.p},
                    {"overlap_naive", n.overlap},
                    {"naive_flagged", n.flagged},
                    {"overlap_layer_min", l.min_overlap},
                    {"layer_flagged", l.flagged},
                    {"layer_nodes", per_node}});
    in_range = in_range && n.overlap >= 0.0 && n.overlap <= 1.0 && l.min_overlap >= 0.0 && l.min_overlap <= 1.0;
    flagged = flagged || n.flagged || l.flagged;
  }
  out.checks.push_back({"overlaps-in-range", in_range, "overlaps must lie in [0, 1]"});
  out.checks.push_back({"nondegenerate", !flagged, flagged ? "a row involves a degenerate ground level" : ""});
  out.report = {{"h", cfg.model.h}, {"J", cfg.model.j}, {"p_max", cfg.p_max}, {"rows", rows}};
  if (cfg.p_max >= 2 && !flagged) {
    bool positive = true;
    for (const auto& n : curves.naive) positive = positive && n.overlap > 0.0;
    if (positive) {
      const LinearFit f = naive_overlap_fit(curves.naive);
      out.report["naive_fit"] = {{"x", "N = 2^p"}, {"y", "ln overlap_naive"}, {"slope", f.slope},
                                 {"intercept", f.intercept}, {"r_squared", f.r_squared}};
    }
  }
  return out;
}

inline ExperimentOutcome figure_gaps(const ExperimentConfig& cfg, const OverlapCurves& curves) {
  ExperimentOutcome out;
  out.csv = io::CsvTable({"p", "gamma_root", "interaction_norm_root"});
  io::json rows = io::json::array();
  bool norms_ok = true, degenerate = false;
  for (const auto& g : curves.gaps) {
    out.csv.add_row({io::cell(g.p), io::cell(g.gamma), io::cell(g.interaction_norm)});
    rows.push_back({{"p", g.p}, {"gamma_root", g.gamma}, {"degenerate", g.degenerate},
                    {"interaction_norm_root", g.interaction_norm}});
    norms_ok = norms_ok && g.interaction_norm == (g.p > 0 ? std::abs(cfg.model.j) : 0.0);
    degenerate = degenerate || g.degenerate;
  }
  out.checks.push_back({"single-bond-interaction", norms_ok, "interaction_norm_root must equal |J| for p >= 1"});
  out.checks.push_back({"nondegenerate", !degenerate, degenerate ? "a chain has a degenerate ground level" : ""});
  out.report = {{"h", cfg.model.h}, {"J", cfg.model.j}, {"p_max", cfg.p_max}, {"rows", rows}};
  return out;
}

inline ExperimentOutcome entropy_experiment(const ExperimentConfig& cfg) {
  require_tfim(cfg);
  const int p_max = std::max(1, cfg.p_max);
  const TfimModel m = build_tfim(p_max, cfg.model.h, cfg.model.j);
  const TreeSpectra sp(decompose(m.op, m.leaf_spans, p_max), {}, false);
  ExperimentOutcome out;
  out.csv = io::CsvTable({"p", "entropy_nats", "success_cap", "max_overlap_sq", "layer_overlap_sq"});
  io::json rows = io::json::array();
  bool ordered = true;
  for (int p = 1; p <= p_max; ++p) {
    const NodeLabel s = NodeLabel::from_index(p_max - p, 0);
    const NodeSpectrum& n = sp.node(s);
    const int half = 1 << (p - 1);
    std::set<int> part_a;
    for (int q = 0; q < half; ++q) part_a.insert(q);
    const double e = entropy(reduced_density(n.ground, part_a));
    const double dim_a = std::ldexp(1.0, half);
    const double cap = success_cap(n.ground, sp.node(s.child(0)).ground, part_a);
    const double bound = max_overlap_for_entropy(std::min(e, std::log(dim_a)), dim_a);
    const double layer_sq = n.child_overlap * n.child_overlap;
    out.csv.add_row({io::cell(p), io::cell(e), io::cell(cap), io::cell(bound), io::cell(layer_sq)});
    rows.push_back({{"p", p},
                    {"entropy_nats", e},
                    {"entropy_bits", nats_to_bits(e)},
                    {"success_cap", cap},
                    {"max_overlap_sq", bound},
                    {"layer_overlap_sq", layer_sq}});
    ordered = ordered && layer_sq <= cap + 1e-12 && cap <= bound + 1e-12;
  }
  out.checks.push_back({"overlap-ordering", ordered, "layer_overlap_sq <= success_cap <= max_overlap_sq"});
  out.report = {{"h", cfg.model.h}, {"J", cfg.model.j}, {"p_max", p_max}, {"rows", rows}};
  return out;
}

inline ExperimentOutcome jw_check(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  out.csv = io::CsvTable({"check", "n_modes", "cases", "failures"});
  std::uint64_t total_failures = 0;
  auto row = [&](const std::string& check, int n, std::uint64_t cases, std::uint64_t failures) {
    out.csv.add_row({check, io::cell(n), io::cell(cases), io::cell(failures)});
    total_failures += failures;
  };
  std::mt19937_64 rng(mix64(cfg.engine.master_seed ^ 0x6a77u));
  for (int n = 1; n <= 6; ++n) {
    const OperatorSum zero(n);
    const OperatorSum one(n, {PauliTerm::identity(1.0)});
    std::uint64_t cases = 0, failures = 0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        const OperatorSum ap = jw_ladder({p, false}, n), aq = jw_ladder({q, false}, n);
        const OperatorSum cp = jw_ladder({p, true}, n), cq = jw_ladder({q, true}, n);
        failures += !(ap * cq + cq * ap).approx_equal(p == q ? one : zero);
        failures += !(ap * aq + aq * ap).approx_equal(zero);
        failures += !(cp * cq + cq * cp).approx_equal(zero);
        cases += 3;
      }
    row("anticommutation", n, cases, failures);

    failures = 0;
    for (int p = 0; p < n; ++p) {
      const OperatorSum num = jw_map({1.0, {{p, true}, {p, false}}}, n);
      const OperatorSum expect(n, {PauliTerm::identity(0.5), PauliTerm(0.5, {PauliFactor{p, PauliAxis::Z}})});
      failures += !num.approx_equal(expect);
    }
    row("number-operator", n, static_cast<std::uint64_t>(n), failures);

    cases = failures = 0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) {
        OperatorSum op = jw_map({1.0, {{p, true}, {q, false}}}, n);
        if (p != q) op = op + op.adjoint();
        const SupportInterval s = support_interval(op);
        ++cases;
        failures += !(s.lo == std::min(p, q) && s.hi == std::max(p, q) && s.semantically_verified);
      }
    row("one-body-support", n, cases, failures);

    if (n >= 2) {
      cases = failures = 0;
      std::uniform_int_distribution<int> mode(0, n - 1);
      while (cases < 40) {
        const int i[4] = {mode(rng), mode(rng), mode(rng), mode(rng)};
        OperatorSum op = jw_map({1.0, {{i[0], true}, {i[1], true}, {i[2], false}, {i[3], false}}}, n);
        op = op + op.adjoint();
        if (op.canonical().empty()) continue;
        bool identity_only = true;
        for (const auto& t : op.canonical().terms()) identity_only = identity_only && !t.support();
        if (identity_only) continue;
        const SupportInterval s = support_interval(op);
        ++cases;
        failures += !(s.lo >= *std::min_element(i, i + 4) && s.hi <= *std::max_element(i, i + 4));
      }
      row("two-body-support", n, cases, failures);
    }
  }
  out.checks.push_back({"jordan-wigner", total_failures == 0, std::to_string(total_failures) + " failed cases"});
  out.report = {{"master_seed", cfg.engine.master_seed}, {"failures", total_failures}};
  return out;
}

}  // namespace detail

/// Runs one experiment; nothing is written.
inline ExperimentOutcome run(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentOutcome out;
  switch (cfg.experiment) {
    case Experiment::TreeInfo:
      out = detail::tree_info(cfg);
      break;
    case Experiment::Prepare:
      out = detail::prepare_runs(cfg);
      break;
    case Experiment::BoundsSweep: {
      out.csv = io::CsvTable({"suite", "instances", "satisfied", "violations"});
      io::json suites = io::json::array();
      for (const auto& s : bounds_sweep(cfg.engine.master_seed)) {
        out.csv.add_row({s.name, io::cell(s.instances), io::cell(s.satisfied), io::cell(s.violations())});
        suites.push_back({{"suite", s.name}, {"instances", s.instances}, {"satisfied", s.satisfied}});
        out.checks.push_back({s.name, s.violations() == 0, std::to_string(s.violations()) + " violations"});
      }
      out.report = {{"master_seed", cfg.engine.master_seed}, {"suites", suites}};
      break;
    }
    case Experiment::FigureOverlaps:
      detail::require_tfim(cfg);
      out = detail::figure_overlaps(cfg, overlap_curves(cfg.p_max, cfg.model.h, cfg.model.j));
      break;
    case Experiment::FigureGaps:
      detail::require_tfim(cfg);
      out = detail::figure_gaps(cfg, overlap_curves(cfg.p_max, cfg.model.h, cfg.model.j));
      break;
    case Experiment::Entropy:
      out = detail::entropy_experiment(cfg);
      break;
    case Experiment::JwCheck:
      out = detail::jw_check(cfg);
      break;
  }
  out.experiment = cfg.experiment;
  out.report["experiment"] = to_string(cfg.experiment);
  out.report["config"] = config_to_json(cfg);
  out.report["checks"] = checks_to_json(out.checks);
  out.report["passed"] = out.passed();
  return out;
}

/// Writes the CSV and report named in the config, if any.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentOutcome& out) {
  if (!cfg.output.csv_path.empty()) io::write_text(cfg.output.csv_path, out.csv.str());
  if (!cfg.output.report_path.empty()) io::write_json(cfg.output.report_path, out.report);
}

}  // namespace dncprep
