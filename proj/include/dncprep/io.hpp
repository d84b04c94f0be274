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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dncprep/common.hpp"
#include "dncprep/fermion.hpp"
#include "dncprep/operator.hpp"
#include "dncprep/prep.hpp"
#include "dncprep/spectra.hpp"
#include "dncprep/tree.hpp"

namespace dncprep::io {

using json = nlohmann::ordered_json;

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be an object");
  auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(where + " is missing \"" + key + "\"");
  return *it;
}

inline int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw InvalidArgument(where + " must be an integer");
  return j.get<int>();
}

inline double as_double(const json& j, const std::string& where) {
  if (!j.is_number()) throw InvalidArgument(where + " must be a number");
  return j.get<double>();
}

}  // namespace detail

/// [re, im] pair; a bare number is read as a real value.
inline json complex_to_json(cplx c) { return json::array({c.real(), c.imag()}); }

inline cplx complex_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InvalidArgument(where + " must be a number or an [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json operator_to_json(const OperatorSum& op) {
  json terms = json::array();
  for (const auto& t : op.terms()) {
    json paulis = json::array();
    for (const auto& f : t.factors()) paulis.push_back(json::array({f.qubit, std::string(1, to_char(f.axis))}));
    terms.push_back({{"coeff", complex_to_json(t.coeff())}, {"paulis", paulis}});
  }
  return {{"n_qubits", op.n_qubits()}, {"terms", terms}};
}

inline OperatorSum operator_from_json(const json& j) {
  const int n = detail::as_int(detail::field(j, "n_qubits", "operator"), "operator.n_qubits");
  if (n < 1 || n > dncprep::detail::kMaxStatevectorQubits) throw InvalidArgument("operator.n_qubits out of range");
  const json& terms = detail::field(j, "terms", "operator");
  if (!terms.is_array()) throw InvalidArgument("operator.terms must be an array");
  std::vector<PauliTerm> out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string where = "operator.terms[" + std::to_string(i) + "]";
    const cplx c = complex_from_json(detail::field(terms[i], "coeff", where), where + ".coeff");
    const json& ps = detail::field(terms[i], "paulis", where);
    if (!ps.is_array()) throw InvalidArgument(where + ".paulis must be an array");
    std::vector<PauliFactor> fs;
    for (const auto& p : ps) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_string() ||
          p[1].get<std::string>().size() != 1)
        throw InvalidArgument(where + ".paulis entries must be [qubit, \"X|Y|Z\"]");
      fs.push_back({p[0].get<int>(), pauli_axis_from_char(p[1].get<std::string>()[0])});
    }
    out.emplace_back(c, std::move(fs));
  }
  return OperatorSum(n, std::move(out));
}

inline json spans_to_json(const std::vector<Span>& spans) {
  json a = json::array();
  for (const auto& s : spans) a.push_back(json::array({s.lo, s.hi}));
  return a;
}

inline std::vector<Span> spans_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InvalidArgument(where + " must be a nonempty array of [lo, hi)");
  std::vector<Span> out;
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() || !s[1].is_number_integer())
      throw InvalidArgument(where + " entries must be [lo, hi] integer pairs");
    out.push_back({s[0].get<int>(), s[1].get<int>()});
  }
  return out;
}

/// Height p with 2^p == count, or throws.
inline int height_for_leaves(std::size_t count) {
  int p = 0;
  while ((std::size_t{1} << p) < count) ++p;
  if ((std::size_t{1} << p) != count)
    throw InvalidArgument("number of leaf spans (" + std::to_string(count) + ") is not a power of two");
  return p;
}

/// Tree file: node term lists are indices into the sibling operator file.
inline json tree_to_json(const HamiltonianTree& tree) {
  json nodes = json::object();
  for (const auto& label : tree.labels()) {
    const auto& terms = tree.terms(label);
    const auto& idx = tree.source_indices(label);
    if (idx.size() != terms.size())
      throw InvalidArgument("node " + label.str() + " has no source indices; only decomposed trees serialize");
    if (!idx.empty()) nodes[label.str()] = idx;
  }
  return {{"p", tree.p()}, {"n_qubits", tree.n_qubits()}, {"leaf_spans", spans_to_json(tree.leaf_spans())},
          {"nodes", nodes}};
}

inline HamiltonianTree tree_from_json(const json& j, const OperatorSum& op) {
  const int p = detail::as_int(detail::field(j, "p", "tree"), "tree.p");
  const int n = detail::as_int(detail::field(j, "n_qubits", "tree"), "tree.n_qubits");
  if (n != op.n_qubits()) throw InvalidArgument("tree.n_qubits does not match the operator file");
  auto spans = spans_from_json(detail::field(j, "leaf_spans", "tree"), "tree.leaf_spans");
  const json& nodes = detail::field(j, "nodes", "tree");
  if (!nodes.is_object()) throw InvalidArgument("tree.nodes must be an object");
  std::map<NodeLabel, NodeTerms> parts;
  std::set<std::size_t> seen;
  for (auto it = nodes.begin(); it != nodes.end(); ++it) {
    const NodeLabel label = NodeLabel::parse(it.key());
    NodeTerms nt;
    if (!it.value().is_array()) throw InvalidArgument("tree.nodes[" + it.key() + "] must be an array");
    for (const auto& v : it.value()) {
      if (!v.is_number_unsigned()) throw InvalidArgument("tree.nodes[" + it.key() + "] holds a non-index");
      const auto i = v.get<std::size_t>();
      if (i >= op.terms().size()) throw InvalidArgument("term index " + std::to_string(i) + " out of range");
      if (!seen.insert(i).second) throw InvalidArgument("term index " + std::to_string(i) + " used twice");
      nt.terms.push_back(op.terms()[i]);
      nt.source_indices.push_back(i);
    }
    parts[label] = std::move(nt);
  }
  return HamiltonianTree::from_parts(p, n, std::move(spans), std::move(parts), op);
}

/// Tensor file: T as a dense matrix, V as a sparse list of [p, q, r, s, value].
inline json tensors_to_json(const BodyTensors& t) {
  const int n = t.n_modes();
  json tm = json::array();
  for (int p = 0; p < n; ++p) {
    json row = json::array();
    for (int q = 0; q < n; ++q) row.push_back(complex_to_json(t.t(p, q)));
    tm.push_back(row);
  }
  json v = json::array();
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s)
          if (t.v(p, q, r, s) != cplx(0.0, 0.0))
            v.push_back(json::array({p, q, r, s, complex_to_json(t.v(p, q, r, s))}));
  return {{"n_modes", n}, {"T", tm}, {"V", v}};
}

inline BodyTensors tensors_from_json(const json& j) {
  const int n = detail::as_int(detail::field(j, "n_modes", "tensors"), "tensors.n_modes");
  if (n < 1 || n > kMaxMolecularModes) throw InvalidArgument("tensors.n_modes out of range");
  BodyTensors t(n);
  if (j.contains("T")) {
    const json& tm = j["T"];
    if (!tm.is_array() || tm.size() != static_cast<std::size_t>(n))
      throw InvalidArgument("tensors.T must be an n_modes x n_modes array");
    for (int p = 0; p < n; ++p) {
      if (!tm[p].is_array() || tm[p].size() != static_cast<std::size_t>(n))
        throw InvalidArgument("tensors.T row " + std::to_string(p) + " has the wrong length");
      for (int q = 0; q < n; ++q)
        t.t(p, q) = complex_from_json(tm[p][q], "tensors.T[" + std::to_string(p) + "][" + std::to_string(q) + "]");
    }
  }
  if (j.contains("V")) {
    const json& v = j["V"];
    if (!v.is_array()) throw InvalidArgument("tensors.V must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& e = v[i];
      const std::string where = "tensors.V[" + std::to_string(i) + "]";
      if (!e.is_array() || e.size() != 5) throw InvalidArgument(where + " must be [p, q, r, s, value]");
      int idx[4];
      for (int k = 0; k < 4; ++k) idx[k] = detail::as_int(e[k], where);
      t.v(idx[0], idx[1], idx[2], idx[3]) += complex_from_json(e[4], where);
    }
  }
  return t;
}

inline json spectrum_to_json(const Spectrum& s, bool include_vectors = false) {
  json j = {{"n_qubits", s.n_qubits},
            {"path", s.path == SolverPath::Dense ? "dense" : "krylov"},
            {"eigenvalues", s.eigenvalues},
            {"residual_norms", s.residual_norms}};
  if (include_vectors) {
    json vs = json::array();
    for (const auto& v : s.eigenvectors) {
      json amps = json::array();
      for (Eigen::Index i = 0; i < v.amplitudes().size(); ++i) amps.push_back(complex_to_json(v.amplitudes()[i]));
      vs.push_back(amps);
    }
    j["eigenvectors"] = vs;
  }
  return j;
}

inline json trace_to_json(const PrepTrace& t) {
  json nodes = json::object();
  for (const auto& [label, c] : t.nodes) nodes[label.str()] = {{"attempts", c.attempts}, {"successes", c.successes}};
  return {{"master_seed", t.master_seed}, {"run_index", t.run_index}, {"unbounded_retries", t.unbounded_retries},
          {"N_V", t.n_v},          {"N_U", t.n_u},             {"nodes", nodes}};
}

inline json report_to_json(const RunReport& r) {
  json hist = json::object();
  for (const auto& [label, h] : r.attempt_histograms) {
    json hj = json::object();
    for (const auto& [attempts, count] : h) hj[std::to_string(attempts)] = count;
    hist[label.str()] = hj;
  }
  return {{"model", to_string(r.model.kind)},
          {"c_qpe", r.model.c_qpe},
          {"p", r.p},
          {"delta", r.delta},
          {"r_lb", r.r_lb},
          {"runs", r.runs},
          {"master_seed", r.master_seed},
          {"unbounded_retries", r.unbounded_retries},
          {"failures", r.failures},
          {"failure_rate", r.failure_rate},
          {"mean_N_V", r.mean_n_v},
          {"mean_N_U", r.mean_n_u},
          {"stderr_N_V", r.stderr_n_v},
          {"stderr_N_U", r.stderr_n_u},
          {"max_N_V", r.max_n_v},
          {"max_N_U", r.max_n_u},
          {"bound_N_V", r.bound_n_v},
          {"bound_N_U", r.bound_n_u},
          {"bound_violations", r.bound_violations},
          {"attempt_histograms", hist}};
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InvalidArgument("malformed JSON in " + path + ": " + e.what());
  }
}

/// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << text;
    if (!out) throw InvalidArgument("write to " + path + " failed");
  }
  std::filesystem::rename(tmp, target);
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// CSV with a header row; each cell is written as given.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    require(cells.size() == header_.size(), "CSV row width does not match the header");
    rows_.push_back(std::move(cells));
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += cells[i];
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "true" : "false"; }

}  // namespace dncprep::io
