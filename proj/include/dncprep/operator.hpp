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

// Pauli-string operator algebra and statevector kernels.
//
// Qubit 0 is the most significant bit of a computational-basis label, so on
// n qubits qubit q corresponds to bit (n - 1 - q) of the basis index.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dncprep/common.hpp"

namespace dncprep {

using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

enum class PauliAxis : std::uint8_t { X, Y, Z };

inline char to_char(PauliAxis a) {
  switch (a) {
    case PauliAxis::X:
      return 'X';
    case PauliAxis::Y:
      return 'Y';
    case PauliAxis::Z:
      return 'Z';
  }
  return '?';
}

inline PauliAxis pauli_axis_from_char(char c) {
  switch (c) {
    case 'X':
    case 'x':
      return PauliAxis::X;
    case 'Y':
    case 'y':
      return PauliAxis::Y;
    case 'Z':
    case 'z':
      return PauliAxis::Z;
    default:
      throw InvalidArgument(std::string("not a Pauli axis: '") + c + "'");
  }
}

struct PauliFactor {
  int qubit;
  PauliAxis axis;
  friend bool operator==(const PauliFactor&, const PauliFactor&) = default;
  friend auto operator<=>(const PauliFactor& a, const PauliFactor& b) {
    if (a.qubit != b.qubit) return a.qubit <=> b.qubit;
    return static_cast<int>(a.axis) <=> static_cast<int>(b.axis);
  }
};

namespace detail {

// sigma_a * sigma_b = phase * sigma_c; axis nullopt means identity.
struct AxisProduct {
  cplx phase;
  std::optional<PauliAxis> axis;
};

inline AxisProduct multiply_axes(PauliAxis a, PauliAxis b) {
  if (a == b) return {1.0, std::nullopt};
  const cplx i(0.0, 1.0);
  const int ia = static_cast<int>(a), ib = static_cast<int>(b);
  const auto c = static_cast<PauliAxis>(3 - ia - ib);
  // Cyclic order X -> Y -> Z gives +i.
  const bool cyclic = (ib - ia + 3) % 3 == 1;
  return {cyclic ? i : -i, c};
}

}  // namespace detail

/// A complex multiple of a tensor product of single-qubit Pauli operators.
/// Factors are kept sorted by qubit with no repeats; an empty factor list is a
/// multiple of the identity.
class PauliTerm {
 public:
  PauliTerm() = default;

  PauliTerm(cplx coeff, std::vector<PauliFactor> factors)
      : coeff_(coeff), factors_(std::move(factors)) {
    std::sort(factors_.begin(), factors_.end());
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      require(factors_[k].qubit >= 0, "negative qubit index in Pauli term");
      if (k > 0 && factors_[k].qubit == factors_[k - 1].qubit)
        throw InvalidArgument("repeated qubit " +
                              std::to_string(factors_[k].qubit) +
                              " in Pauli term");
    }
  }

  static PauliTerm identity(cplx coeff) { return PauliTerm(coeff, std::vector<PauliFactor>{}); }

  cplx coeff() const { return coeff_; }
  const std::vector<PauliFactor>& factors() const { return factors_; }
  bool is_identity() const { return factors_.empty(); }

  /// Smallest and largest qubit acted on nontrivially; nullopt for identity.
  std::optional<std::pair<int, int>> support() const {
    if (factors_.empty()) return std::nullopt;
    return std::make_pair(factors_.front().qubit, factors_.back().qubit);
  }

  PauliTerm with_coeff(cplx c) const {
    PauliTerm t = *this;
    t.coeff_ = c;
    return t;
  }

  /// Same Pauli string (coefficients ignored).
  bool same_string(const PauliTerm& o) const { return factors_ == o.factors_; }

  /// Relabels qubit q as q + offset.
  PauliTerm shifted(int offset) const {
    PauliTerm t = *this;
    for (auto& f : t.factors_) f.qubit += offset;
    return t;
  }

  friend PauliTerm operator*(const PauliTerm& a, const PauliTerm& b) {
    cplx phase = a.coeff_ * b.coeff_;
    std::vector<PauliFactor> out;
    out.reserve(a.factors_.size() + b.factors_.size());
    std::size_t i = 0, j = 0;
    while (i < a.factors_.size() || j < b.factors_.size()) {
      if (j == b.factors_.size() ||
          (i < a.factors_.size() && a.factors_[i].qubit < b.factors_[j].qubit)) {
        out.push_back(a.factors_[i++]);
      } else if (i == a.factors_.size() || b.factors_[j].qubit < a.factors_[i].qubit) {
        out.push_back(b.factors_[j++]);
      } else {
        auto p = detail::multiply_axes(a.factors_[i].axis, b.factors_[j].axis);
        phase *= p.phase;
        if (p.axis) out.push_back({a.factors_[i].qubit, *p.axis});
        ++i;
        ++j;
      }
    }
    PauliTerm t;
    t.coeff_ = phase;
    t.factors_ = std::move(out);
    return t;
  }

  std::string to_string() const {
    std::string s;
    for (const auto& f : factors_) {
      if (!s.empty()) s += ' ';
      s += to_char(f.axis);
      s += std::to_string(f.qubit);
    }
    return s.empty() ? "I" : s;
  }

 private:
  cplx coeff_{1.0, 0.0};
  std::vector<PauliFactor> factors_;
};

/// Weighted sum of Pauli strings on a fixed number of qubits.
class OperatorSum {
 public:
  static constexpr double kDropTolerance = 1e-14;
  static constexpr double kHermitianTolerance = 1e-12;

  OperatorSum() = default;

  OperatorSum(int n_qubits, std::vector<PauliTerm> terms)
      : n_qubits_(n_qubits), terms_(std::move(terms)) {
    require(n_qubits >= 1, "operator needs at least one qubit");
    for (const auto& t : terms_) {
      if (auto s = t.support(); s && s->second >= n_qubits)
        throw InvalidArgument("term " + t.to_string() + " acts outside " +
                              std::to_string(n_qubits) + " qubits");
    }
  }

  explicit OperatorSum(int n_qubits) : OperatorSum(n_qubits, {}) {}

  int n_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return std::size_t{1} << n_qubits_; }
  const std::vector<PauliTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Merges identical Pauli strings and drops negligible coefficients. Terms
  /// come out sorted by their factor lists.
  OperatorSum canonical() const {
    std::vector<PauliTerm> sorted = terms_;
    std::stable_sort(sorted.begin(), sorted.end(), [](const PauliTerm& a, const PauliTerm& b) {
      return a.factors() < b.factors();
    });
    std::vector<PauliTerm> merged;
    for (const auto& t : sorted) {
      if (!merged.empty() && merged.back().same_string(t))
        merged.back() = merged.back().with_coeff(merged.back().coeff() + t.coeff());
      else
        merged.push_back(t);
    }
    std::erase_if(merged, [](const PauliTerm& t) { return std::abs(t.coeff()) < kDropTolerance; });
    OperatorSum out;
    out.n_qubits_ = n_qubits_;
    out.terms_ = std::move(merged);
    return out;
  }

  /// Pauli strings are Hermitian, so the sum is Hermitian iff every canonical
  /// coefficient is real.
  bool is_hermitian(double tol = kHermitianTolerance) const {
    for (const auto& t : canonical().terms_)
      if (std::abs(t.coeff().imag()) > tol) return false;
    return true;
  }

  /// Canonical form with imaginary parts stripped. Caller checks hermiticity.
  OperatorSum real_part() const {
    OperatorSum c = canonical();
    for (auto& t : c.terms_) t = t.with_coeff(t.coeff().real());
    return c.canonical();
  }

  OperatorSum adjoint() const {
    OperatorSum out = *this;
    for (auto& t : out.terms_) t = t.with_coeff(std::conj(t.coeff()));
    return out;
  }

  /// Re-embeds on new_n qubits with qubit q relabelled q + offset.
  OperatorSum shifted(int offset, int new_n) const {
    std::vector<PauliTerm> ts;
    ts.reserve(terms_.size());
    for (const auto& t : terms_) ts.push_back(t.shifted(offset));
    return OperatorSum(new_n, std::move(ts));
  }

  double one_norm() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.coeff());
    return s;
  }

  friend OperatorSum operator+(const OperatorSum& a, const OperatorSum& b) {
    check_same(a, b);
    std::vector<PauliTerm> ts = a.terms_;
    ts.insert(ts.end(), b.terms_.begin(), b.terms_.end());
    return OperatorSum(a.n_qubits_, std::move(ts)).canonical();
  }

  friend OperatorSum operator-(const OperatorSum& a, const OperatorSum& b) { return a + (-1.0) * b; }

  friend OperatorSum operator*(cplx s, const OperatorSum& a) {
    OperatorSum out = a;
    for (auto& t : out.terms_) t = t.with_coeff(s * t.coeff());
    return out.canonical();
  }

  friend OperatorSum operator*(const OperatorSum& a, const OperatorSum& b) {
    check_same(a, b);
    std::vector<PauliTerm> ts;
    ts.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& x : a.terms_)
      for (const auto& y : b.terms_) ts.push_back(x * y);
    return OperatorSum(a.n_qubits_, std::move(ts)).canonical();
  }

  /// Exact equality of canonical forms up to an absolute coefficient tolerance.
  bool approx_equal(const OperatorSum& o, double tol = 1e-12) const {
    if (n_qubits_ != o.n_qubits_) return false;
    auto d = (*this - o);
    for (const auto& t : d.terms_)
      if (std::abs(t.coeff()) > tol) return false;
    return true;
  }

  std::string to_string() const {
    std::string s;
    for (const auto& t : terms_) {
      if (!s.empty()) s += " + ";
      s += "(" + format_double(t.coeff().real()) + "," + format_double(t.coeff().imag()) +
           ")*" + t.to_string();
    }
    return s.empty() ? "0" : s;
  }

 private:
  static void check_same(const OperatorSum& a, const OperatorSum& b) {
    if (a.n_qubits_ != b.n_qubits_)
      throw DimensionMismatch("operators act on " + std::to_string(a.n_qubits_) + " and " +
                              std::to_string(b.n_qubits_) + " qubits");
  }

  int n_qubits_ = 1;
  std::vector<PauliTerm> terms_;
};

/// Normalized state on n qubits.
class StateVector {
 public:
  static constexpr double kNormTolerance = 1e-10;

  StateVector() = default;

  StateVector(int n_qubits, Vector amplitudes) : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
    require(n_qubits >= 1, "state needs at least one qubit");
    if (static_cast<std::size_t>(amps_.size()) != (std::size_t{1} << n_qubits))
      throw DimensionMismatch("state of " + std::to_string(n_qubits) + " qubits needs " +
                              std::to_string(std::size_t{1} << n_qubits) + " amplitudes, got " +
                              std::to_string(amps_.size()));
    if (std::abs(amps_.norm() - 1.0) > kNormTolerance)
      throw InvalidArgument("state is not normalized (norm " + format_double(amps_.norm()) + ")");
  }

  /// Scales v to unit norm; rejects the zero vector.
  static StateVector normalized(int n_qubits, Vector v) {
    const double nrm = v.norm();
    require(nrm > 0.0, "cannot normalize the zero vector");
    v /= nrm;
    return StateVector(n_qubits, std::move(v));
  }

  static StateVector basis(int n_qubits, std::size_t index) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(std::size_t{1} << n_qubits));
    require(index < static_cast<std::size_t>(v.size()), "basis index out of range");
    v[static_cast<Eigen::Index>(index)] = 1.0;
    return StateVector(n_qubits, std::move(v));
  }

  int n_qubits() const { return n_qubits_; }
  const Vector& amplitudes() const { return amps_; }

 private:
  int n_qubits_ = 1;
  Vector amps_ = Vector::Ones(2) / std::sqrt(2.0);
};

/// |a> (x) |b>, with a on the lower-numbered (more significant) qubits.
inline StateVector tensor(const StateVector& a, const StateVector& b) {
  const auto& x = a.amplitudes();
  const auto& y = b.amplitudes();
  Vector v(x.size() * y.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) v.segment(i * y.size(), y.size()) = x[i] * y;
  return StateVector::normalized(a.n_qubits() + b.n_qubits(), std::move(v));
}

namespace detail {

struct CompiledTerm {
  std::uint64_t x_mask;
  std::uint64_t z_mask;
  cplx coeff;  // includes the i^{#Y} from Y = i X Z
};

inline std::vector<CompiledTerm> compile(const OperatorSum& op) {
  const int n = op.n_qubits();
  std::vector<CompiledTerm> out;
  out.reserve(op.terms().size());
  for (const auto& t : op.terms()) {
    CompiledTerm c{0, 0, t.coeff()};
    for (const auto& f : t.factors()) {
      const std::uint64_t bit = std::uint64_t{1} << (n - 1 - f.qubit);
      switch (f.axis) {
        case PauliAxis::X:
          c.x_mask |= bit;
          break;
        case PauliAxis::Z:
          c.z_mask |= bit;
          break;
        case PauliAxis::Y:
          c.x_mask |= bit;
          c.z_mask |= bit;
          c.coeff *= cplx(0.0, 1.0);
          break;
      }
    }
    out.push_back(c);
  }
  return out;
}

inline void apply_compiled(const std::vector<CompiledTerm>& terms, const Vector& in, Vector& out) {
  out.setZero(in.size());
  const auto dim = static_cast<std::uint64_t>(in.size());
  for (const auto& t : terms) {
    for (std::uint64_t b = 0; b < dim; ++b) {
      const cplx a = in[static_cast<Eigen::Index>(b)];
      if (a == cplx(0.0)) continue;
      const bool odd = std::popcount(b & t.z_mask) & 1;
      const cplx v = odd ? -t.coeff * a : t.coeff * a;
      out[static_cast<Eigen::Index>(b ^ t.x_mask)] += v;
    }
  }
}

inline constexpr int kMaxStatevectorQubits = 30;

}  // namespace detail

/// Reusable matrix-free operator: compiles the Pauli masks once.
class LinearOperator {
 public:
  explicit LinearOperator(const OperatorSum& op)
      : n_qubits_(op.n_qubits()), terms_(detail::compile(op)) {
    require(n_qubits_ <= detail::kMaxStatevectorQubits,
            "operator too large for statevector kernels");
  }

  int n_qubits() const { return n_qubits_; }
  Eigen::Index dimension() const { return Eigen::Index{1} << n_qubits_; }

  void apply(const Vector& in, Vector& out) const {
    if (in.size() != dimension())
      throw DimensionMismatch("vector of length " + std::to_string(in.size()) +
                              " does not match operator dimension " +
                              std::to_string(dimension()));
    detail::apply_compiled(terms_, in, out);
  }

  Vector operator()(const Vector& in) const {
    Vector out;
    apply(in, out);
    return out;
  }

 private:
  int n_qubits_;
  std::vector<detail::CompiledTerm> terms_;
};

/// op * v, term by term, without forming a matrix.
inline Vector apply(const OperatorSum& op, const Vector& v) { return LinearOperator(op)(v); }

inline Vector apply(const OperatorSum& op, const StateVector& v) {
  if (op.n_qubits() != v.n_qubits())
    throw DimensionMismatch("operator on " + std::to_string(op.n_qubits()) +
                            " qubits applied to state on " + std::to_string(v.n_qubits()));
  return apply(op, v.amplitudes());
}

inline constexpr std::size_t kDenseLimit = 4096;

/// Full matrix of op; refuses dimensions above kDenseLimit.
inline Matrix to_dense(const OperatorSum& op) {
  const std::size_t dim = op.dimension();
  if (op.n_qubits() > 12 || dim > kDenseLimit)
    throw InvalidArgument("dense matrix of dimension " + std::to_string(dim) +
                          " exceeds the limit " + std::to_string(kDenseLimit));
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (const auto& t : detail::compile(op)) {
    for (std::uint64_t b = 0; b < dim; ++b) {
      const bool odd = std::popcount(b & t.z_mask) & 1;
      m(static_cast<Eigen::Index>(b ^ t.x_mask), static_cast<Eigen::Index>(b)) +=
          odd ? -t.coeff : t.coeff;
    }
  }
  return m;
}

struct NormBounds {
  double one_norm_upper = 0.0;
  double power_estimate = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Spectral-norm bracket: the 1-norm of the coefficients (a certified upper
/// bound) and a power-iteration estimate on op^2. The power estimate stops once
/// ||H^2 v - mu v|| <= 1e-8 mu, which pins mu to relative 1e-8. If the cap is
/// hit the estimate is still a valid lower bound and converged is false.
inline NormBounds norm_bounds(const OperatorSum& op, int max_iterations = 50000) {
  if (!op.is_hermitian()) throw InvalidArgument("norm_bounds requires a Hermitian operator");
  const OperatorSum h = op.real_part();
  NormBounds nb;
  nb.one_norm_upper = h.one_norm();
  if (h.empty()) return nb;
  if (h.terms().size() == 1) {
    nb.power_estimate = std::abs(h.terms().front().coeff());
    return nb;
  }
  const LinearOperator lin(h);
  Vector v(lin.dimension());
  std::uint64_t s = 0x5eed;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s = mix64(s);
    v[i] = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
  }
  v.normalize();
  Vector hv, h2v;
  double mu = 0.0;
  nb.converged = false;
  for (int it = 1; it <= max_iterations; ++it) {
    lin.apply(v, hv);
    lin.apply(hv, h2v);
    mu = v.dot(h2v).real();
    nb.iterations = it;
    if (mu <= 0.0) {
      // v is in the kernel of H; the operator is not zero, so restart elsewhere.
      v = Vector::Ones(v.size()).normalized();
      continue;
    }
    const double res = (h2v - mu * v).norm();
    if (res <= 1e-8 * mu) {
      nb.converged = true;
      break;
    }
    v = h2v / h2v.norm();
  }
  nb.power_estimate = std::sqrt(std::max(mu, 0.0));
  return nb;
}

inline double inner_abs(const Vector& a, const Vector& b) { return std::abs(a.dot(b)); }

}  // namespace dncprep
