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

// Lowest eigenpairs of Pauli-sum Hamiltonians, spectral gaps and overlaps.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dncprep/operator.hpp"

namespace dncprep {

enum class SolverPath { Dense, Krylov };

struct Spectrum {
  int n_qubits = 1;
  std::vector<double> eigenvalues;  // ascending
  std::vector<StateVector> eigenvectors;
  std::vector<double> residual_norms;
  SolverPath path = SolverPath::Dense;
  int matvecs = 0;

  std::size_t size() const { return eigenvalues.size(); }
  const StateVector& ground() const { return eigenvectors.front(); }
};

struct EigenOptions {
  std::size_t dense_threshold = kDenseLimit;
  bool force_krylov = false;
  int max_matvecs = 20000;
  int krylov_dim = 0;  // 0 picks max(2k + 20, 40)
  std::uint64_t seed = 0x1a2b3c4d;
};

/// Residual tolerance used throughout: 1e-10 * max(1, ||H||_1).
inline double default_tolerance(const OperatorSum& op) {
  return 1e-10 * std::max(1.0, op.one_norm());
}

namespace detail {

// The largest-magnitude amplitude (lowest index on ties) is made real positive.
inline void fix_phase(Vector& v) {
  Eigen::Index best = 0;
  double mag = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > mag * (1.0 + 1e-12)) {
      mag = a;
      best = i;
    }
  }
  if (mag > 0.0) v *= std::conj(v[best]) / std::abs(v[best]);
}

inline Vector random_vector(Eigen::Index dim, std::uint64_t seed) {
  Vector v(dim);
  std::uint64_t s = seed;
  for (Eigen::Index i = 0; i < dim; ++i) {
    s = mix64(s);
    const double re = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
    s = mix64(s);
    const double im = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
    v[i] = cplx(re, im);
  }
  return v;
}

struct RitzPairs {
  std::vector<double> values;
  std::vector<Vector> vectors;
  int matvecs = 0;
};

// Thick-restart Lanczos with full reorthogonalization for the k lowest
// eigenpairs of P H P, where P projects out `locked` (orthonormal vectors).
inline RitzPairs krylov_lowest(const LinearOperator& h, int k, double tol,
                               const EigenOptions& opts, const std::vector<Vector>& locked,
                               std::uint64_t seed) {
  const Eigen::Index dim = h.dimension();
  const int free_dim = static_cast<int>(dim) - static_cast<int>(locked.size());
  require(k >= 1 && k <= free_dim, "requested more eigenpairs than the space holds");
  const int m_max = std::min(free_dim, opts.krylov_dim > 0 ? opts.krylov_dim : std::max(2 * k + 20, 40));
  const int keep = std::min(m_max - 1, k + (m_max - k) / 2);

  auto project = [&](Vector& w) {
    for (const auto& u : locked) w -= u * u.dot(w);
  };
  // Basis vectors are the first `cols` columns of v.
  Matrix v(dim, m_max);
  int cols = 0;
  auto orthogonalize = [&](Vector& w, Eigen::VectorXcd* coeffs) {
    for (int pass = 0; pass < 2; ++pass) {
      if (cols > 0) {
        const Eigen::VectorXcd c = v.leftCols(cols).adjoint() * w;
        w.noalias() -= v.leftCols(cols) * c;
        if (coeffs) *coeffs += c;
      }
      project(w);
    }
  };
  std::uint64_t restart_seed = seed;
  auto fresh_vector = [&]() {
    for (int attempt = 0; attempt < 8; ++attempt) {
      restart_seed = mix64(restart_seed + 0x9e37);
      Vector w = random_vector(dim, restart_seed);
      project(w);
      orthogonalize(w, nullptr);
      const double n = w.norm();
      if (n > 1e-8) return Vector(w / n);
    }
    throw ConvergenceFailure("could not extend the Krylov basis", 0, 0.0);
  };

  v.col(cols++) = fresh_vector();
  Matrix t = Matrix::Zero(m_max, m_max);
  int matvecs = 0;
  Vector w, x, residual;
  double best_residual = 0.0;

  while (true) {
    // Expand to m_max vectors; column j of t holds <v_i, H v_j> for i <= j.
    double f_norm = 0.0;
    for (int j = cols - 1;; ++j) {
      x = v.col(j);
      h.apply(x, w);
      project(w);
      ++matvecs;
      Eigen::VectorXcd coeffs = Eigen::VectorXcd::Zero(cols);
      orthogonalize(w, &coeffs);
      for (Eigen::Index i = 0; i <= j; ++i) t(i, j) = coeffs[i];
      f_norm = w.norm();
      if (cols == m_max) {
        residual = w;
        break;
      }
      const double scale = std::max(1.0, std::abs(t(j, j)));
      if (f_norm <= 1e-12 * scale) {
        // Invariant subspace: continue from a fresh direction with no coupling.
        const Vector f = fresh_vector();
        v.col(cols++) = f;
      } else {
        v.col(cols++) = w / f_norm;
      }
    }

    const int m = m_max;
    const Matrix projected = t.selfadjointView<Eigen::Upper>();
    Eigen::SelfAdjointEigenSolver<Matrix> es(projected);
    const Eigen::VectorXd& theta = es.eigenvalues();
    const Matrix& y = es.eigenvectors();
    const bool exhausted = m == free_dim;

    bool estimates_ok = true;
    best_residual = 0.0;
    for (int i = 0; i < k; ++i) {
      const double est = exhausted ? 0.0 : f_norm * std::abs(y(m - 1, i));
      best_residual = std::max(best_residual, est);
      if (est > 0.5 * tol) estimates_ok = false;
    }

    if (estimates_ok || exhausted) {
      RitzPairs rp;
      const Matrix xs = v * y.leftCols(k);
      rp.matvecs = matvecs;
      bool all_ok = true;
      for (int i = 0; i < k; ++i) {
        Vector xi = xs.col(i).normalized();
        h.apply(xi, w);
        project(w);
        ++rp.matvecs;
        ++matvecs;
        const double lam = xi.dot(w).real();
        rp.values.push_back(lam);
        const double res = (w - lam * xi).norm();
        best_residual = std::max(best_residual, res);
        if (res > tol) all_ok = false;
        rp.vectors.push_back(std::move(xi));
      }
      if (all_ok) return rp;
      if (exhausted)
        throw ConvergenceFailure("Krylov space exhausted without meeting the residual tolerance",
                                 matvecs, best_residual);
    }
    if (matvecs >= opts.max_matvecs)
      throw ConvergenceFailure("Lanczos did not converge within " +
                                   std::to_string(opts.max_matvecs) + " matrix-vector products",
                               matvecs, best_residual);

    // Thick restart: keep the lowest Ritz vectors and continue from the residual.
    const Matrix kept = v * y.leftCols(keep);
    v.leftCols(keep) = kept;
    cols = keep;
    t.setZero();
    for (int i = 0; i < keep; ++i) t(i, i) = theta[i];
    if (f_norm > 1e-12 * std::max(1.0, std::abs(theta[0]))) {
      Vector next = residual / f_norm;
      orthogonalize(next, nullptr);
      v.col(cols++) = next.normalized();
    } else {
      const Vector f = fresh_vector();
      v.col(cols++) = f;
    }
  }
}

inline Spectrum finish_spectrum(const OperatorSum& op, std::vector<double> values,
                                std::vector<Vector> vectors, SolverPath path, int matvecs) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  const LinearOperator lin(op);
  Spectrum s;
  s.n_qubits = op.n_qubits();
  s.path = path;
  s.matvecs = matvecs;
  for (auto idx : order) {
    Vector v = vectors[idx];
    fix_phase(v);
    const double lam = values[idx];
    s.residual_norms.push_back((lin(v) - lam * v).norm());
    s.eigenvalues.push_back(lam);
    s.eigenvectors.push_back(StateVector::normalized(op.n_qubits(), std::move(v)));
  }
  return s;
}

}  // namespace detail

/// Full dense diagonalization (all 2^n eigenpairs); the oracle path.
inline Spectrum dense_spectrum(const OperatorSum& op) {
  if (!op.is_hermitian()) throw InvalidArgument("eigensolver requires a Hermitian operator");
  const OperatorSum h = op.real_part();
  Eigen::SelfAdjointEigenSolver<Matrix> es(to_dense(h));
  std::vector<double> vals;
  std::vector<Vector> vecs;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    vals.push_back(es.eigenvalues()[i]);
    vecs.emplace_back(es.eigenvectors().col(i));
  }
  return detail::finish_spectrum(h, std::move(vals), std::move(vecs), SolverPath::Dense, 0);
}

/// The k smallest eigenpairs of a Hermitian operator. Dense diagonalization up
/// to opts.dense_threshold, thick-restart Lanczos above it (or when forced).
/// Every returned pair has ||Hv - lambda v|| <= tol.
inline Spectrum lowest_eigenpairs(const OperatorSum& op, int k, double tol,
                                  const EigenOptions& opts = {}) {
  require(tol > 0.0, "eigensolver tolerance must be positive");
  require(k >= 1, "need at least one eigenpair");
  if (static_cast<std::size_t>(k) > op.dimension())
    throw InvalidArgument("asked for " + std::to_string(k) + " eigenpairs of a " +
                          std::to_string(op.dimension()) + "-dimensional operator");
  if (!op.is_hermitian()) throw InvalidArgument("eigensolver requires a Hermitian operator");
  const OperatorSum h = op.real_part();

  if (!opts.force_krylov && h.dimension() <= opts.dense_threshold) {
    Spectrum full = dense_spectrum(h);
    full.eigenvalues.resize(static_cast<std::size_t>(k));
    full.eigenvectors.resize(static_cast<std::size_t>(k));
    full.residual_norms.resize(static_cast<std::size_t>(k));
    return full;
  }

  const LinearOperator lin(h);
  auto rp = detail::krylov_lowest(lin, k, tol, opts, {}, opts.seed);
  int matvecs = rp.matvecs;

  // A single Krylov sequence sees one vector per exactly degenerate eigenspace.
  // Search the complement of what was found for anything lower and swap it in.
  for (int round = 0; round < k && static_cast<Eigen::Index>(k) < lin.dimension(); ++round) {
    auto deflated = detail::krylov_lowest(lin, 1, tol, opts, rp.vectors, mix64(opts.seed + round + 1));
    matvecs += deflated.matvecs;
    const auto top = std::max_element(rp.values.begin(), rp.values.end());
    if (deflated.values[0] >= *top - tol) break;
    const auto pos = static_cast<std::size_t>(top - rp.values.begin());
    rp.values[pos] = deflated.values[0];
    rp.vectors[pos] = deflated.vectors[0];
  }
  Spectrum s = detail::finish_spectrum(h, std::move(rp.values), std::move(rp.vectors),
                                       SolverPath::Krylov, matvecs);
  for (double r : s.residual_norms)
    if (r > tol)
      throw ConvergenceFailure("eigenpair residual above tolerance after Lanczos", matvecs, r);
  return s;
}

inline Spectrum lowest_eigenpairs(const OperatorSum& op, int k) {
  return lowest_eigenpairs(op, k, default_tolerance(op));
}

struct Gap {
  double value = 0.0;
  bool degenerate = false;
};

inline constexpr double kDegeneracyThreshold = 1e-8;

/// E1 - E0, flagged degenerate below 1e-8 * max(1, |E0|).
inline Gap spectral_gap(const Spectrum& s) {
  if (s.size() < 2) throw InvalidArgument("spectral gap needs at least two eigenvalues");
  Gap g;
  g.value = std::max(0.0, s.eigenvalues[1] - s.eigenvalues[0]);
  g.degenerate = g.value < kDegeneracyThreshold * std::max(1.0, std::abs(s.eigenvalues[0]));
  return g;
}

/// |<a|b>|.
inline double overlap_abs(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits())
    throw DimensionMismatch("overlap of states on " + std::to_string(a.n_qubits()) + " and " +
                            std::to_string(b.n_qubits()) + " qubits");
  return std::abs(a.amplitudes().dot(b.amplitudes()));
}

}  // namespace dncprep
