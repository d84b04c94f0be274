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
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dncprep/common.hpp"
#include "dncprep/operator.hpp"

namespace dncprep {

/// Hermitian, unit-trace, positive semidefinite matrix (each within 1e-10).
class DensityMatrix {
 public:
  static constexpr double kTolerance = 1e-10;

  explicit DensityMatrix(Matrix entries) : m_(std::move(entries)) {
    require(m_.rows() >= 1 && m_.rows() == m_.cols(), "density matrix must be square and nonempty");
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kTolerance)
      throw InvalidArgument("density matrix is not Hermitian");
    if (std::abs(m_.trace() - cplx(1.0, 0.0)) > kTolerance)
      throw InvalidArgument("density matrix trace is " + format_double(m_.trace().real()) + ", not 1");
    m_ = (m_ + m_.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    eigenvalues_ = es.eigenvalues();
    if (eigenvalues_.minCoeff() < -kTolerance)
      throw InvalidArgument("density matrix has eigenvalue " + format_double(eigenvalues_.minCoeff()));
  }

  static DensityMatrix pure(const StateVector& s) {
    const Vector& v = s.amplitudes();
    return DensityMatrix(v * v.adjoint());
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& entries() const { return m_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

 private:
  Matrix m_;
  Eigen::VectorXd eigenvalues_;
};

/// Partial trace onto the qubits in `keep`. The lowest kept index is the most
/// significant bit of the reduced basis.
inline DensityMatrix reduced_density(const StateVector& state, const std::set<int>& keep) {
  const int n = state.n_qubits();
  if (keep.empty()) throw InvalidArgument("keep-set is empty");
  for (int q : keep)
    if (q < 0 || q >= n) throw InvalidArgument("qubit " + std::to_string(q) + " out of range");
  if (static_cast<int>(keep.size()) == n) throw InvalidArgument("keep-set covers every qubit");
  const int k = static_cast<int>(keep.size());
  std::vector<int> kept(keep.begin(), keep.end()), traced;
  for (int q = 0; q < n; ++q)
    if (!keep.count(q)) traced.push_back(q);
  auto bit = [n](std::uint64_t b, int q) { return (b >> (n - 1 - q)) & 1U; };
  Matrix m = Matrix::Zero(Eigen::Index{1} << k, Eigen::Index{1} << (n - k));
  const Vector& amps = state.amplitudes();
  for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
    std::uint64_t a = 0, c = 0;
    for (int q : kept) a = (a << 1) | bit(b, q);
    for (int q : traced) c = (c << 1) | bit(b, q);
    m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) = amps[static_cast<Eigen::Index>(b)];
  }
  return DensityMatrix(m * m.adjoint());
}

/// Von Neumann entropy in nats; eigenvalues below 1e-14 count as zero.
inline double entropy(const DensityMatrix& rho) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < rho.eigenvalues().size(); ++i) {
    const double p = rho.eigenvalues()[i];
    if (p >= 1e-14) s -= p * std::log(p);
  }
  return std::max(0.0, s);
}

inline double nats_to_bits(double nats) { return nats / std::log(2.0); }
inline double bits_to_nats(double bits) { return bits * std::log(2.0); }

/// <psi_A| rho_A |psi_A>, the largest merge success probability compatible
/// with the marginal of `full` on the qubits in `part_a`.
inline double success_cap(const StateVector& full, const StateVector& psi_a, const std::set<int>& part_a) {
  if (psi_a.n_qubits() != static_cast<int>(part_a.size()))
    throw DimensionMismatch("psi_A has " + std::to_string(psi_a.n_qubits()) + " qubits, partition has " +
                            std::to_string(part_a.size()));
  const DensityMatrix rho = reduced_density(full, part_a);
  const Vector& v = psi_a.amplitudes();
  return std::clamp(v.dot(rho.entries() * v).real(), 0.0, 1.0);
}

namespace detail {

inline void check_entropy_args(double e, double dim_a) {
  if (!(dim_a >= 2.0)) throw InvalidArgument("dim_A must be at least 2");
  if (!(e >= 0.0) || e > std::log(dim_a) * (1.0 + 1e-15))
    throw InvalidArgument("entropy " + format_double(e) + " outside [0, ln dim_A]");
}

// Bisection for the root of a decreasing f on [lo, hi], run to machine resolution.
template <typename F>
double bisect_decreasing(F f, double target, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Entropy of r^2 |psi><psi| + (1 - r^2)/(d - 1) (1 - |psi><psi|).
inline double max_entropy_at_overlap(double r_sq, double dim_a) {
  require(r_sq >= 0.0 && r_sq <= 1.0, "r^2 must lie in [0, 1]");
  double s = 0.0;
  if (r_sq > 0.0) s -= r_sq * std::log(r_sq);
  if (r_sq < 1.0) s -= (1.0 - r_sq) * std::log((1.0 - r_sq) / (dim_a - 1.0));
  return s;
}

/// The looser form -(1 - r^2) ln((1 - r^2)/(d - 1)).
inline double loose_entropy_at_overlap(double r_sq, double dim_a) {
  require(r_sq >= 0.0 && r_sq <= 1.0, "r^2 must lie in [0, 1]");
  return r_sq < 1.0 ? -(1.0 - r_sq) * std::log((1.0 - r_sq) / (dim_a - 1.0)) : 0.0;
}

/// Largest r^2 in [1/d, 1] whose entropy-maximizing marginal has entropy E (nats).
inline double max_overlap_for_entropy(double e, double dim_a) {
  detail::check_entropy_args(e, dim_a);
  if (e == 0.0) return 1.0;
  const double floor = 1.0 / dim_a;
  if (e >= std::log(dim_a)) return floor;
  return detail::bisect_decreasing([dim_a](double x) { return max_entropy_at_overlap(x, dim_a); }, e,
                                   floor, 1.0);
}

/// r^2 solving E = -(1 - r^2) ln((1 - r^2)/(d - 1)) on [1/d, 1]; entropies
/// beyond the looser curve's range give 1/d.
inline double loose_overlap_for_entropy(double e, double dim_a) {
  detail::check_entropy_args(e, dim_a);
  if (e == 0.0) return 1.0;
  const double floor = 1.0 / dim_a;
  if (e >= loose_entropy_at_overlap(floor, dim_a)) return floor;
  return detail::bisect_decreasing([dim_a](double x) { return loose_entropy_at_overlap(x, dim_a); }, e,
                                   floor, 1.0);
}

}  // namespace dncprep
