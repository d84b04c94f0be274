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
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dncprep/common.hpp"
#include "dncprep/operator.hpp"

namespace dncprep {

/// Binary string addressing a node of a perfect binary tree. The empty string
/// is the root and is written "*".
class NodeLabel {
 public:
  NodeLabel() = default;

  static NodeLabel root() { return NodeLabel(); }

  static NodeLabel parse(const std::string& text) {
    NodeLabel l;
    if (text == "*") return l;
    require(!text.empty(), "empty node label; the root is written \"*\"");
    for (char c : text)
      if (c != '0' && c != '1') throw InvalidArgument("node label '" + text + "' is not a binary string");
    l.bits_ = text;
    return l;
  }

  const std::string& bits() const { return bits_; }
  int depth() const { return static_cast<int>(bits_.size()); }
  bool is_root() const { return bits_.empty(); }
  std::string str() const { return bits_.empty() ? "*" : bits_; }

  NodeLabel child(int bit) const {
    require(bit == 0 || bit == 1, "child bit must be 0 or 1");
    NodeLabel l = *this;
    l.bits_ += static_cast<char>('0' + bit);
    return l;
  }

  NodeLabel parent() const {
    require(!is_root(), "the root has no parent");
    NodeLabel l = *this;
    l.bits_.pop_back();
    return l;
  }

  /// True when this node lies in the subtree rooted at `ancestor` (inclusive).
  bool descends_from(const NodeLabel& ancestor) const {
    return bits_.compare(0, ancestor.bits_.size(), ancestor.bits_) == 0 &&
           bits_.size() >= ancestor.bits_.size();
  }

  /// Position among the nodes of its depth, reading the bits as a binary number.
  std::size_t index() const {
    std::size_t v = 0;
    for (char c : bits_) v = (v << 1) | static_cast<std::size_t>(c - '0');
    return v;
  }

  static NodeLabel from_index(int depth, std::size_t index) {
    NodeLabel l;
    for (int d = depth - 1; d >= 0; --d) l.bits_ += static_cast<char>('0' + ((index >> d) & 1U));
    return l;
  }

  friend bool operator==(const NodeLabel&, const NodeLabel&) = default;
  // Breadth-first order: shallower first, then by bits.
  friend bool operator<(const NodeLabel& a, const NodeLabel& b) {
    if (a.bits_.size() != b.bits_.size()) return a.bits_.size() < b.bits_.size();
    return a.bits_ < b.bits_;
  }

 private:
  std::string bits_;
};

/// Half-open qubit interval [lo, hi).
struct Span {
  int lo = 0;
  int hi = 0;
  int size() const { return hi - lo; }
  bool contains(int q) const { return q >= lo && q < hi; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// Splits n_qubits into 2^p contiguous spans whose sizes differ by at most one.
inline std::vector<Span> even_spans(int n_qubits, int p) {
  require(p >= 0 && p < 30, "tree height out of range");
  const int leaves = 1 << p;
  require(n_qubits >= leaves, "fewer qubits than leaves");
  std::vector<Span> out;
  int lo = 0;
  for (int i = 0; i < leaves; ++i) {
    const int size = n_qubits / leaves + (i < n_qubits % leaves ? 1 : 0);
    out.push_back({lo, lo + size});
    lo += size;
  }
  return out;
}

/// Terms assigned to one node, with their positions in the source operator
/// (empty for hand-built trees).
struct NodeTerms {
  std::vector<PauliTerm> terms;
  std::vector<std::size_t> source_indices;
};

class HamiltonianTree {
 public:
  HamiltonianTree() = default;

  /// Hand assembly without invariant checks beyond label well-formedness;
  /// use validate() to inspect the result.
  static HamiltonianTree from_parts(int p, int n_qubits, std::vector<Span> leaf_spans,
                                    std::map<NodeLabel, NodeTerms> nodes, OperatorSum reference) {
    require(p >= 0 && p < 30, "tree height out of range");
    require(n_qubits >= 1, "tree needs at least one qubit");
    require(leaf_spans.size() == (std::size_t{1} << p), "expected 2^p leaf spans");
    require(reference.n_qubits() == n_qubits, "reference operator has the wrong qubit count");
    for (const auto& [label, _] : nodes)
      if (label.depth() > p) throw InvalidArgument("node label " + label.str() + " deeper than the tree");
    HamiltonianTree t;
    t.p_ = p;
    t.n_qubits_ = n_qubits;
    t.spans_ = std::move(leaf_spans);
    t.nodes_ = std::move(nodes);
    t.reference_ = std::move(reference);
    return t;
  }

  int p() const { return p_; }
  int n_qubits() const { return n_qubits_; }
  const std::vector<Span>& leaf_spans() const { return spans_; }
  const OperatorSum& reference() const { return reference_; }

  bool is_valid_label(const NodeLabel& s) const { return s.depth() <= p_; }
  bool is_leaf(const NodeLabel& s) const { return s.depth() == p_; }

  void check_label(const NodeLabel& s) const {
    if (!is_valid_label(s))
      throw InvalidArgument("node " + s.str() + " is not in a tree of height " + std::to_string(p_));
  }

  /// Qubits covered by the leaves below s.
  Span span(const NodeLabel& s) const {
    check_label(s);
    const int shift = p_ - s.depth();
    const std::size_t first = s.index() << shift;
    const std::size_t last = ((s.index() + 1) << shift) - 1;
    return {spans_[first].lo, spans_[last].hi};
  }

  /// The A_s terms of node s (empty if none were assigned).
  const std::vector<PauliTerm>& terms(const NodeLabel& s) const {
    check_label(s);
    static const std::vector<PauliTerm> kNone;
    auto it = nodes_.find(s);
    return it == nodes_.end() ? kNone : it->second.terms;
  }

  const std::vector<std::size_t>& source_indices(const NodeLabel& s) const {
    check_label(s);
    static const std::vector<std::size_t> kNone;
    auto it = nodes_.find(s);
    return it == nodes_.end() ? kNone : it->second.source_indices;
  }

  const std::map<NodeLabel, NodeTerms>& nodes() const { return nodes_; }

  /// Every label of the tree in breadth-first order.
  std::vector<NodeLabel> labels() const {
    std::vector<NodeLabel> out;
    for (int d = 0; d <= p_; ++d)
      for (std::size_t i = 0; i < (std::size_t{1} << d); ++i) out.push_back(NodeLabel::from_index(d, i));
    return out;
  }

  /// Index of the leaf whose span holds qubit q.
  std::size_t leaf_of(int q) const {
    auto it = std::upper_bound(spans_.begin(), spans_.end(), q,
                               [](int v, const Span& sp) { return v < sp.hi; });
    require(it != spans_.end() && it->contains(q), "qubit " + std::to_string(q) + " lies in no leaf span");
    return static_cast<std::size_t>(it - spans_.begin());
  }

  /// Deepest node whose span contains the support of t. Identity terms belong to the root.
  NodeLabel deepest_cover(const PauliTerm& t) const {
    const auto sup = t.support();
    if (!sup) return NodeLabel::root();
    std::size_t a = leaf_of(sup->first);
    std::size_t b = leaf_of(sup->second);
    int depth = p_;
    while (a != b) {
      a >>= 1;
      b >>= 1;
      --depth;
    }
    return NodeLabel::from_index(depth, a);
  }

 private:
  int p_ = 0;
  int n_qubits_ = 0;
  std::vector<Span> spans_;
  std::map<NodeLabel, NodeTerms> nodes_;
  OperatorSum reference_;
};

/// Throws unless spans partition [0, n_qubits) in order into nonempty pieces.
inline void check_partition(const std::vector<Span>& spans, int n_qubits) {
  int next = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].lo != next || spans[i].hi <= spans[i].lo)
      throw InvalidArgument("leaf spans do not partition [0, " + std::to_string(n_qubits) +
                            ") in order (problem at span " + std::to_string(i) + ")");
    next = spans[i].hi;
  }
  if (next != n_qubits)
    throw InvalidArgument("leaf spans cover [0, " + std::to_string(next) + ") instead of [0, " +
                          std::to_string(n_qubits) + ")");
}

/// Assigns every term of `full` to the deepest node covering its support.
inline HamiltonianTree decompose(const OperatorSum& full, std::vector<Span> leaf_spans, int p) {
  require(p >= 0 && p < 30, "tree height out of range");
  if (leaf_spans.size() != (std::size_t{1} << p))
    throw InvalidArgument("expected " + std::to_string(std::size_t{1} << p) + " leaf spans, got " +
                          std::to_string(leaf_spans.size()));
  check_partition(leaf_spans, full.n_qubits());
  auto tree = HamiltonianTree::from_parts(p, full.n_qubits(), std::move(leaf_spans), {}, full);
  std::map<NodeLabel, NodeTerms> nodes;
  for (std::size_t i = 0; i < full.terms().size(); ++i) {
    const PauliTerm& t = full.terms()[i];
    auto& slot = nodes[tree.deepest_cover(t)];
    slot.terms.push_back(t);
    slot.source_indices.push_back(i);
  }
  return HamiltonianTree::from_parts(p, full.n_qubits(), tree.leaf_spans(), std::move(nodes), full);
}

/// Sum of A_t over the subtree rooted at s, relabelled onto the span of s.
inline OperatorSum subsystem_hamiltonian(const HamiltonianTree& tree, const NodeLabel& s) {
  const Span sp = tree.span(s);
  std::vector<PauliTerm> out;
  for (const auto& [label, nt] : tree.nodes()) {
    if (!label.descends_from(s)) continue;
    for (const auto& t : nt.terms) {
      if (auto sup = t.support(); sup && (sup->first < sp.lo || sup->second >= sp.hi))
        throw InvalidArgument("term " + t.to_string() + " of node " + label.str() +
                              " leaves the span of node " + s.str());
      out.push_back(t.shifted(-sp.lo));
    }
  }
  return OperatorSum(sp.size(), std::move(out));
}

/// A_s alone, relabelled onto the span of s.
inline OperatorSum node_operator(const HamiltonianTree& tree, const NodeLabel& s) {
  const Span sp = tree.span(s);
  std::vector<PauliTerm> out;
  for (const auto& t : tree.terms(s)) {
    if (auto sup = t.support(); sup && (sup->first < sp.lo || sup->second >= sp.hi))
      throw InvalidArgument("term " + t.to_string() + " leaves the span of node " + s.str());
    out.push_back(t.shifted(-sp.lo));
  }
  return OperatorSum(sp.size(), std::move(out));
}

/// A term flagged by a check: its node and its position in that node's list.
struct TermRef {
  NodeLabel node;
  std::size_t position = 0;
  std::string term;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  std::vector<TermRef> offending;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }

  const CheckResult& check(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw InvalidArgument("no check named " + name);
  }
};

/// Checks: "partition", "containment", "deepest-node", "reconstruction".
inline ValidationReport validate(const HamiltonianTree& tree) {
  ValidationReport report;

  CheckResult partition{"partition", true, {}, ""};
  try {
    check_partition(tree.leaf_spans(), tree.n_qubits());
  } catch (const InvalidArgument& e) {
    partition.passed = false;
    partition.detail = e.what();
  }
  report.checks.push_back(partition);

  CheckResult containment{"containment", true, {}, ""};
  CheckResult deepest{"deepest-node", true, {}, ""};
  if (partition.passed) {
    for (const auto& [label, nt] : tree.nodes()) {
      const Span sp = tree.span(label);
      for (std::size_t i = 0; i < nt.terms.size(); ++i) {
        const PauliTerm& t = nt.terms[i];
        const TermRef ref{label, i, t.to_string()};
        const auto sup = t.support();
        if (sup && (sup->first < sp.lo || sup->second >= sp.hi || sup->second >= tree.n_qubits())) {
          containment.passed = false;
          containment.offending.push_back(ref);
          continue;
        }
        if (!(tree.deepest_cover(t) == label)) {
          deepest.passed = false;
          deepest.offending.push_back(ref);
        }
      }
    }
  } else {
    containment.passed = deepest.passed = false;
    containment.detail = deepest.detail = "skipped: leaf spans are malformed";
  }
  report.checks.push_back(containment);
  report.checks.push_back(deepest);

  CheckResult recon{"reconstruction", true, {}, ""};
  std::vector<PauliTerm> all;
  for (const auto& [label, nt] : tree.nodes())
    for (const auto& t : nt.terms)
      if (!t.support() || t.support()->second < tree.n_qubits()) all.push_back(t);
  const OperatorSum rebuilt = OperatorSum(tree.n_qubits(), std::move(all)).canonical();
  const OperatorSum ref = tree.reference().canonical();
  if (!rebuilt.approx_equal(ref, 1e-12)) {
    recon.passed = false;
    const OperatorSum diff = (rebuilt - ref).canonical();
    recon.detail = diff.empty() ? "terms outside the qubit range" : "difference " + diff.to_string();
  }
  report.checks.push_back(recon);
  return report;
}

}  // namespace dncprep
