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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dncprep/common.hpp"
#include "dncprep/operator.hpp"

namespace dncprep {

/// One creation (dagger = true) or annihilation operator.
struct LadderOp {
  int mode = 0;
  bool dagger = false;
};

/// coeff * op_0 op_1 ... op_k, kept in the given order.
struct FermionProduct {
  cplx coeff{1.0, 0.0};
  std::vector<LadderOp> factors;
};

/// Jordan-Wigner image of a single ladder operator:
/// Z_0 ... Z_{p-1} (X_p + iY_p)/2 for a^dagger_p, with -iY for a_p.
/// Qubit |0> is the occupied state, so a^dagger_p a_p = (1 + Z_p)/2.
inline OperatorSum jw_ladder(LadderOp op, int n_modes) {
  require(n_modes >= 1, "need at least one mode");
  if (op.mode < 0 || op.mode >= n_modes)
    throw InvalidArgument("mode " + std::to_string(op.mode) + " out of range for " +
                          std::to_string(n_modes) + " modes");
  std::vector<PauliFactor> zs;
  for (int j = 0; j < op.mode; ++j) zs.push_back({j, PauliAxis::Z});
  auto with = [&](PauliAxis a) {
    auto f = zs;
    f.push_back({op.mode, a});
    return f;
  };
  return OperatorSum(n_modes, {PauliTerm(0.5, with(PauliAxis::X)),
                               PauliTerm(cplx(0.0, op.dagger ? 0.5 : -0.5), with(PauliAxis::Y))});
}

/// Pauli expansion of a fermionic product, canonicalized.
inline OperatorSum jw_map(const FermionProduct& prod, int n_modes) {
  OperatorSum out(n_modes, {PauliTerm::identity(prod.coeff)});
  for (const auto& f : prod.factors) out = out * jw_ladder(f, n_modes);
  return out.canonical();
}

/// One- and two-body coefficients T_pq and V_pqrs.
class BodyTensors {
 public:
  explicit BodyTensors(int n_modes)
      : n_(n_modes),
        t_(Matrix::Zero(n_modes, n_modes)),
        v_(static_cast<std::size_t>(n_modes) * n_modes * n_modes * n_modes, cplx(0.0, 0.0)) {
    require(n_modes >= 1, "need at least one mode");
  }

  int n_modes() const { return n_; }
  Matrix& t() { return t_; }
  const Matrix& t() const { return t_; }
  cplx& t(int p, int q) { return t_(check(p), check(q)); }
  cplx t(int p, int q) const { return t_(check(p), check(q)); }
  cplx& v(int p, int q, int r, int s) { return v_[index(p, q, r, s)]; }
  cplx v(int p, int q, int r, int s) const { return v_[index(p, q, r, s)]; }

 private:
  int check(int p) const {
    if (p < 0 || p >= n_) throw InvalidArgument("mode index " + std::to_string(p) + " out of range");
    return p;
  }
  std::size_t index(int p, int q, int r, int s) const {
    const auto n = static_cast<std::size_t>(n_);
    return ((static_cast<std::size_t>(check(p)) * n + static_cast<std::size_t>(check(q))) * n +
            static_cast<std::size_t>(check(r))) * n +
           static_cast<std::size_t>(check(s));
  }

  int n_;
  Matrix t_;
  std::vector<cplx> v_;
};

inline constexpr int kMaxMolecularModes = 14;
inline constexpr double kMolecularHermitianTolerance = 1e-10;

/// sum T_pq a+_p a_q + sum V_pqrs a+_p a+_q a_r a_s, mapped and canonicalized.
/// Throws if any canonical coefficient keeps an imaginary part above 1e-10.
inline OperatorSum build_molecular(const BodyTensors& tensors) {
  const int n = tensors.n_modes();
  if (n > kMaxMolecularModes)
    throw InvalidArgument("molecular assembly supports at most " + std::to_string(kMaxMolecularModes) +
                          " modes, got " + std::to_string(n));
  std::vector<PauliTerm> terms;
  auto add = [&](const FermionProduct& fp) {
    const OperatorSum m = jw_map(fp, n);
    terms.insert(terms.end(), m.terms().begin(), m.terms().end());
  };
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      if (tensors.t(p, q) != cplx(0.0, 0.0)) add({tensors.t(p, q), {{p, true}, {q, false}}});
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int r = 0; r < n; ++r)
        for (int s = 0; s < n; ++s)
          if (tensors.v(p, q, r, s) != cplx(0.0, 0.0))
            add({tensors.v(p, q, r, s), {{p, true}, {q, true}, {r, false}, {s, false}}});
  const OperatorSum sum = OperatorSum(n, std::move(terms)).canonical();
  for (const auto& t : sum.terms())
    if (std::abs(t.coeff().imag()) > kMolecularHermitianTolerance)
      throw InvalidArgument("assembled Hamiltonian is not Hermitian: term " + t.to_string() +
                            " has coefficient " + format_double(t.coeff().real()) + " + " +
                            format_double(t.coeff().imag()) + "i");
  return sum.real_part();
}

inline constexpr std::size_t kSemanticSupportLimit = 256;

struct SupportInterval {
  int lo = 0;
  int hi = 0;
  /// Dense check that op commutes with X, Y, Z on every qubit outside [lo, hi].
  bool semantically_verified = false;
};

/// Smallest qubit interval holding every non-identity factor of the canonical form.
inline SupportInterval support_interval(const OperatorSum& op) {
  const OperatorSum c = op.canonical();
  std::optional<std::pair<int, int>> range;
  for (const auto& t : c.terms()) {
    const auto s = t.support();
    if (!s) continue;
    range = range ? std::make_pair(std::min(range->first, s->first), std::max(range->second, s->second)) : *s;
  }
  if (!range) throw InvalidArgument("operator acts on no qubit; its support is empty");
  SupportInterval out{range->first, range->second, false};
  if (c.dimension() <= kSemanticSupportLimit) {
    const Matrix m = to_dense(c);
    const double scale = std::max(1.0, m.norm());
    for (int q = 0; q < c.n_qubits(); ++q) {
      if (q >= out.lo && q <= out.hi) continue;
      for (PauliAxis a : {PauliAxis::X, PauliAxis::Y, PauliAxis::Z}) {
        const Matrix p = to_dense(OperatorSum(c.n_qubits(), {PauliTerm(1.0, {PauliFactor{q, a}})}));
        if ((m * p - p * m).norm() > 1e-12 * scale)
          throw InvalidArgument("operator fails to commute with " + std::string(1, to_char(a)) +
                                std::to_string(q) + " outside its support");
      }
    }
    out.semantically_verified = true;
  }
  return out;
}

}  // namespace dncprep
