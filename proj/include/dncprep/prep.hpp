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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dncprep/common.hpp"
#include "dncprep/operator.hpp"
#include "dncprep/spectra.hpp"
#include "dncprep/tree.hpp"

namespace dncprep {

enum class QpeKind { IdealProjective, PessimisticCleve };

inline std::string to_string(QpeKind k) {
  return k == QpeKind::IdealProjective ? "IdealProjective" : "PessimisticCleve";
}

inline QpeKind qpe_kind_from_string(const std::string& s) {
  if (s == "IdealProjective") return QpeKind::IdealProjective;
  if (s == "PessimisticCleve") return QpeKind::PessimisticCleve;
  throw InvalidArgument("unknown QPE model '" + s + "' (expected IdealProjective or PessimisticCleve)");
}

struct QpeModel {
  QpeKind kind = QpeKind::IdealProjective;
  double c_qpe = 1.0;

  /// Merge success probability given the squared child-product overlap.
  double success_probability(double overlap_sq) const {
    const double q = std::clamp(overlap_sq, 0.0, 1.0);
    return kind == QpeKind::IdealProjective ? q : q * 4.0 / (kPi * kPi);
  }

  /// Controlled-evolution applications charged per merge attempt.
  std::uint64_t u_cost(double norm, double gap) const {
    require(c_qpe > 0.0, "c_qpe must be positive");
    require(gap > 0.0, "spectral gap must be positive");
    return static_cast<std::uint64_t>(std::ceil(c_qpe * norm / gap));
  }
};

/// Number of merge rounds so that (1 - 4 r^2 / pi^2)^k <= delta_prime.
inline std::uint64_t repetitions(double r_lb, double delta_prime) {
  if (!(r_lb > 0.0 && r_lb <= 1.0))
    throw InvalidArgument("overlap lower bound must lie in (0, 1], got " + format_double(r_lb));
  if (!(delta_prime > 0.0 && delta_prime < 1.0))
    throw InvalidArgument("failure budget must lie in (0, 1), got " + format_double(delta_prime));
  const double k = std::ceil(std::log(1.0 / delta_prime) * kPi * kPi / (4.0 * r_lb * r_lb));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(k));
}

struct AnalyticBounds {
  double n_v = 0.0;
  double n_u = 0.0;
  double exponent = 0.0;
};

/// Closed-form query bounds with base-2 logarithms. p = 0 gives (C1, 0).
inline AnalyticBounds analytic_bounds(int p, double r, double delta, double h_max, double gamma_min,
                                      double c1 = 1.0, double c2 = 1.0) {
  require(p >= 0, "tree height must be nonnegative");
  if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("r must lie in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  require(c1 > 0.0 && c2 > 0.0, "bound constants must be positive");
  if (p == 0) return {c1, 0.0, 0.0};
  if (!(gamma_min > 0.0)) throw InvalidArgument("gamma_min must be positive");
  if (!(h_max >= gamma_min)) throw InvalidArgument("H_max must be at least gamma_min");
  AnalyticBounds b;
  b.exponent = p * (1.0 + std::log2(kPi * kPi / (4.0 * r * r)) + std::log2(std::log2(1.0 / delta)) +
                    std::log2(2.0 * p));
  b.n_v = c1 * std::exp2(b.exponent);
  b.n_u = c2 * h_max / gamma_min * std::exp2(b.exponent);
  return b;
}

/// Both sides of (1 - delta/n)^n >= 1 - delta.
struct BudgetSplitCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline BudgetSplitCheck budget_split_check(double delta, int n) {
  require(delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
  require(n >= 1, "n must be positive");
  BudgetSplitCheck c;
  c.lhs = std::pow(1.0 - delta / n, n);
  c.rhs = 1.0 - delta;
  c.holds = c.lhs >= c.rhs;
  return c;
}

/// Classical data for one tree node.
struct NodeSpectrum {
  NodeLabel label;
  int n_qubits = 0;
  StateVector ground;
  double energy = 0.0;
  double gap = 0.0;
  bool degenerate = false;
  double norm = 0.0;
  /// |<psi_s | psi_s0 (x) psi_s1>| for internal nodes, 1 for leaves.
  double child_overlap = 1.0;
  /// Spectral norm of A_s.
  double interaction_norm = 0.0;
};

/// Spectral norm of a Hermitian operator as max(|E_min|, |E_max|).
inline double spectral_norm(const OperatorSum& op, const EigenOptions& opts = {}) {
  const OperatorSum h = op.real_part().canonical();
  if (h.empty()) return 0.0;
  if (h.terms().size() == 1) return std::abs(h.terms().front().coeff());
  if (h.dimension() <= opts.dense_threshold && !opts.force_krylov) {
    const Spectrum s = dense_spectrum(h);
    return std::max(std::abs(s.eigenvalues.front()), std::abs(s.eigenvalues.back()));
  }
  const double lo = lowest_eigenpairs(h, 1, default_tolerance(h), opts).eigenvalues[0];
  const double hi = -lowest_eigenpairs(-1.0 * h, 1, default_tolerance(h), opts).eigenvalues[0];
  return std::max(std::abs(lo), std::abs(hi));
}

/// Ground states, gaps, norms and child overlaps for every node of a tree.
class TreeSpectra {
 public:
  /// with_norms = false leaves norm and interaction_norm as NaN.
  explicit TreeSpectra(HamiltonianTree tree, EigenOptions opts = {}, bool with_norms = true)
      : tree_(std::move(tree)) {
    const auto labels = tree_.labels();
    for (auto it = labels.rbegin(); it != labels.rend(); ++it) {
      const NodeLabel& s = *it;
      const OperatorSum h = subsystem_hamiltonian(tree_, s);
      NodeSpectrum ns;
      ns.label = s;
      ns.n_qubits = h.n_qubits();
      const int k = h.dimension() >= 2 ? 2 : 1;
      const Spectrum sp = lowest_eigenpairs(h, k, default_tolerance(h), opts);
      ns.ground = sp.ground();
      ns.energy = sp.eigenvalues[0];
      if (k == 2) {
        const Gap g = spectral_gap(sp);
        ns.gap = g.value;
        ns.degenerate = g.degenerate;
      }
      if (with_norms) {
        ns.norm = spectral_norm(h, opts);
        ns.interaction_norm = spectral_norm(node_operator(tree_, s), opts);
      } else {
        ns.norm = ns.interaction_norm = std::numeric_limits<double>::quiet_NaN();
      }
      if (!tree_.is_leaf(s)) {
        const StateVector product = tensor(nodes_.at(s.child(0)).ground, nodes_.at(s.child(1)).ground);
        ns.child_overlap = std::min(1.0, overlap_abs(ns.ground, product));
      }
      nodes_.emplace(s, std::move(ns));
    }
  }

  const HamiltonianTree& tree() const { return tree_; }

  const NodeSpectrum& node(const NodeLabel& s) const {
    tree_.check_label(s);
    return nodes_.at(s);
  }

  /// Labels in the subtree rooted at s, breadth first.
  std::vector<NodeLabel> subtree(const NodeLabel& s) const {
    std::vector<NodeLabel> out;
    for (const auto& l : tree_.labels())
      if (l.descends_from(s)) out.push_back(l);
    return out;
  }

  /// Smallest child-product overlap over internal nodes below s (1 if none).
  double min_child_overlap(const NodeLabel& s) const {
    double r = 1.0;
    for (const auto& l : subtree(s))
      if (!tree_.is_leaf(l)) r = std::min(r, node(l).child_overlap);
    return r;
  }

  double max_norm(const NodeLabel& s) const {
    double h = 0.0;
    for (const auto& l : subtree(s)) h = std::max(h, node(l).norm);
    return h;
  }

  double min_gap(const NodeLabel& s) const {
    double g = std::numeric_limits<double>::infinity();
    for (const auto& l : subtree(s)) g = std::min(g, node(l).gap);
    return g;
  }

  /// Throws DegenerateSpectrum naming the first degenerate node below s.
  void require_nondegenerate(const NodeLabel& s) const {
    for (const auto& l : subtree(s)) {
      const auto& n = node(l);
      if (n.degenerate)
        throw DegenerateSpectrum("node " + l.str() + " has a degenerate ground level (gap " +
                                 format_double(n.gap) + "); the protocol is undefined there");
    }
  }

 private:
  HamiltonianTree tree_;
  std::map<NodeLabel, NodeSpectrum> nodes_;
};

/// Per-run random stream derived from (master_seed, run_index).
class Rng {
 public:
  Rng(std::uint64_t master_seed, std::uint64_t run_index)
      : engine_(mix64(master_seed ^ mix64(run_index + 0x632be59bd9b4e019ULL))) {}

  /// Uniform double in [0, 1) from the top 53 bits of one engine draw.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

struct NodeCounters {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
};

/// Counters for one protocol run. For leaves an attempt is one oracle query;
/// for internal nodes it is one phase-estimation merge.
struct PrepTrace {
  std::map<NodeLabel, NodeCounters> nodes;
  std::uint64_t n_v = 0;
  std::uint64_t n_u = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t run_index = 0;
  bool unbounded_retries = false;
};

struct PrepResult {
  bool succeeded = false;
  std::optional<StateVector> state;
  PrepTrace trace;
  double delta = 0.0;
};

struct MergeOutcome {
  bool success = false;
  std::uint64_t u_applications = 0;
};

/// One phase-estimation merge at internal node s from the given child states.
inline MergeOutcome merge(const TreeSpectra& spectra, const NodeLabel& s, const StateVector& child0,
                          const StateVector& child1, const QpeModel& model, Rng& rng) {
  const HamiltonianTree& tree = spectra.tree();
  tree.check_label(s);
  require(!tree.is_leaf(s), "merge needs an internal node");
  const NodeSpectrum& ns = spectra.node(s);
  if (ns.degenerate)
    throw DegenerateSpectrum("node " + s.str() + " has a degenerate ground level; merge refused");
  const StateVector product = tensor(child0, child1);
  if (product.n_qubits() != ns.n_qubits)
    throw DimensionMismatch("child states span " + std::to_string(product.n_qubits()) +
                            " qubits, node " + s.str() + " spans " + std::to_string(ns.n_qubits));
  const double r = overlap_abs(ns.ground, product);
  MergeOutcome out;
  out.u_applications = model.u_cost(ns.norm, ns.gap);
  out.success = rng.uniform() < model.success_probability(r * r);
  return out;
}

struct PrepOptions {
  QpeModel model;
  /// Diagnostic mode: retry every merge until it succeeds, ignoring k.
  bool unbounded_retries = false;
};

namespace detail {

class Preparer {
 public:
  Preparer(const TreeSpectra& spectra, double r_lb, const PrepOptions& opts, Rng& rng, PrepTrace& trace)
      : spectra_(spectra), r_lb_(r_lb), opts_(opts), rng_(rng), trace_(trace) {}

  bool run(const NodeLabel& s, double delta) {
    const HamiltonianTree& tree = spectra_.tree();
    NodeCounters& c = trace_.nodes[s];
    if (tree.is_leaf(s)) {
      ++c.attempts;
      ++c.successes;
      ++trace_.n_v;
      return true;
    }
    const NodeSpectrum& ns = spectra_.node(s);
    const double q = opts_.model.success_probability(ns.child_overlap * ns.child_overlap);
    const std::uint64_t u = opts_.model.u_cost(ns.norm, ns.gap);
    const double child_delta = delta / 3.0;
    const std::uint64_t k = opts_.unbounded_retries ? std::numeric_limits<std::uint64_t>::max()
                                                    : repetitions(r_lb_, child_delta);
    for (std::uint64_t round = 0; round < k; ++round) {
      if (!run(s.child(0), child_delta)) return false;
      if (!run(s.child(1), child_delta)) return false;
      NodeCounters& here = trace_.nodes[s];
      ++here.attempts;
      trace_.n_u += u;
      if (rng_.uniform() < q) {
        ++here.successes;
        return true;
      }
    }
    return false;
  }

 private:
  const TreeSpectra& spectra_;
  double r_lb_;
  const PrepOptions& opts_;
  Rng& rng_;
  PrepTrace& trace_;
};

}  // namespace detail

/// Runs the recursive protocol at node s with failure budget delta.
inline PrepResult prepare(const TreeSpectra& spectra, const NodeLabel& s, double delta, double r_lb,
                          const PrepOptions& opts, std::uint64_t master_seed, std::uint64_t run_index) {
  spectra.tree().check_label(s);
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (!(r_lb > 0.0 && r_lb <= 1.0)) throw InvalidArgument("r_lb must lie in (0, 1]");
  spectra.require_nondegenerate(s);
  if (opts.unbounded_retries) {
    for (const auto& l : spectra.subtree(s)) {
      if (spectra.tree().is_leaf(l)) continue;
      const double c = spectra.node(l).child_overlap;
      if (opts.model.success_probability(c * c) < 1e-12)
        throw InvalidArgument("node " + l.str() + " has zero merge probability; unbounded retries would not stop");
    }
  }
  PrepResult result;
  result.delta = delta;
  result.trace.master_seed = master_seed;
  result.trace.run_index = run_index;
  result.trace.unbounded_retries = opts.unbounded_retries;
  for (const auto& l : spectra.subtree(s)) result.trace.nodes[l];
  Rng rng(master_seed, run_index);
  detail::Preparer prep(spectra, r_lb, opts, rng, result.trace);
  result.succeeded = prep.run(s, delta);
  if (result.succeeded) result.state = spectra.node(s).ground;
  return result;
}

struct MonteCarloConfig {
  PrepOptions options;
  double delta = 0.1;
  /// Overlap lower bound; the measured minimum child overlap when unset.
  std::optional<double> r_lb;
  std::uint64_t runs = 10000;
  std::uint64_t master_seed = 1;
  double c1 = 1.0;
};

/// Aggregate statistics over independent seeded runs at the root.
struct RunReport {
  QpeModel model;
  int p = 0;
  double delta = 0.0;
  double r_lb = 0.0;
  std::uint64_t runs = 0;
  std::uint64_t master_seed = 0;
  bool unbounded_retries = false;
  std::uint64_t failures = 0;
  double failure_rate = 0.0;
  double mean_n_v = 0.0;
  double mean_n_u = 0.0;
  double stderr_n_v = 0.0;
  double stderr_n_u = 0.0;
  std::uint64_t max_n_v = 0;
  std::uint64_t max_n_u = 0;
  double bound_n_v = 0.0;
  double bound_n_u = 0.0;
  /// Runs whose counts exceeded the analytic bounds.
  std::uint64_t bound_violations = 0;
  /// Per node: attempts-per-run value -> number of runs.
  std::map<NodeLabel, std::map<std::uint64_t, std::uint64_t>> attempt_histograms;
};

inline RunReport run_monte_carlo(const TreeSpectra& spectra, const MonteCarloConfig& cfg) {
  require(cfg.runs >= 1, "need at least one run");
  const NodeLabel root = NodeLabel::root();
  RunReport rep;
  rep.model = cfg.options.model;
  rep.p = spectra.tree().p();
  rep.delta = cfg.delta;
  rep.r_lb = cfg.r_lb ? *cfg.r_lb : spectra.min_child_overlap(root);
  rep.runs = cfg.runs;
  rep.master_seed = cfg.master_seed;
  rep.unbounded_retries = cfg.options.unbounded_retries;
  const double h_max = spectra.max_norm(root);
  const double g_min = spectra.min_gap(root);
  const AnalyticBounds b = analytic_bounds(rep.p, rep.r_lb, cfg.delta, h_max, g_min, cfg.c1,
                                           cfg.options.model.c_qpe);
  rep.bound_n_v = b.n_v;
  rep.bound_n_u = b.n_u;
  double sum_v = 0.0, sum_u = 0.0, sq_v = 0.0, sq_u = 0.0;
  for (std::uint64_t run = 0; run < cfg.runs; ++run) {
    const PrepResult r = prepare(spectra, root, cfg.delta, rep.r_lb, cfg.options, cfg.master_seed, run);
    if (!r.succeeded) ++rep.failures;
    const auto v = static_cast<double>(r.trace.n_v);
    const auto u = static_cast<double>(r.trace.n_u);
    sum_v += v;
    sum_u += u;
    sq_v += v * v;
    sq_u += u * u;
    rep.max_n_v = std::max(rep.max_n_v, r.trace.n_v);
    rep.max_n_u = std::max(rep.max_n_u, r.trace.n_u);
    if (v > rep.bound_n_v || u > rep.bound_n_u) ++rep.bound_violations;
    for (const auto& [label, c] : r.trace.nodes) ++rep.attempt_histograms[label][c.attempts];
  }
  const double n = static_cast<double>(cfg.runs);
  rep.failure_rate = static_cast<double>(rep.failures) / n;
  rep.mean_n_v = sum_v / n;
  rep.mean_n_u = sum_u / n;
  if (cfg.runs > 1) {
    rep.stderr_n_v = std::sqrt(std::max(0.0, (sq_v - n * rep.mean_n_v * rep.mean_n_v) / (n - 1)) / n);
    rep.stderr_n_u = std::sqrt(std::max(0.0, (sq_u - n * rep.mean_n_u * rep.mean_n_u) / (n - 1)) / n);
  }
  return rep;
}

}  // namespace dncprep
