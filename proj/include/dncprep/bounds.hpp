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
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dncprep/common.hpp"
#include "dncprep/operator.hpp"

namespace dncprep {

/// A measured quantity against its theoretical ceiling.
struct BoundReport {
  double bound_value = 0.0;
  double measured_value = 0.0;
  bool satisfied = false;
  std::vector<std::pair<std::string, std::string>> context;

  void note(const std::string& key, double v) { context.emplace_back(key, format_double(v)); }
  void note(const std::string& key, const std::string& v) { context.emplace_back(key, v); }
};

inline constexpr double kBoundSlack = 1e-10;

inline BoundReport make_report(double bound, double measured) {
  BoundReport r;
  r.bound_value = bound;
  r.measured_value = measured;
  r.satisfied = measured <= bound + kBoundSlack;
  return r;
}

/// Largest singular value.
inline double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()[0];
}

namespace detail {

inline void require_square_pair(const Matrix& a, const Matrix& b) {
  require(a.rows() == a.cols() && b.rows() == b.cols(), "matrices must be square");
  if (a.rows() != b.rows())
    throw DimensionMismatch("matrices of size " + std::to_string(a.rows()) + " and " +
                            std::to_string(b.rows()));
}

inline void require_hermitian(const Matrix& a, const char* what) {
  if ((a - a.adjoint()).norm() > 1e-10 * std::max(1.0, a.norm()))
    throw InvalidArgument(std::string(what) + " is not Hermitian");
}

inline void require_dense_size(Eigen::Index dim) {
  if (static_cast<std::size_t>(dim) > kDenseLimit)
    throw InvalidArgument("dimension " + std::to_string(dim) + " exceeds the dense limit " +
                          std::to_string(kDenseLimit));
}

}  // namespace detail

/// Eigenvector perturbation: sqrt(1 - |<v_j, v'_j>|^2) <= (pi/2) ||A - A'|| / delta_j.
inline BoundReport davis_kahan(const Matrix& a, const Matrix& a_prime, Eigen::Index j) {
  detail::require_square_pair(a, a_prime);
  detail::require_hermitian(a, "A");
  detail::require_hermitian(a_prime, "A'");
  detail::require_dense_size(a.rows());
  const Eigen::Index n = a.rows();
  if (j < 0 || j >= n) throw InvalidArgument("eigen-index out of range");
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a), eb(a_prime);
  const auto& lam = ea.eigenvalues();
  const auto& lamp = eb.eigenvalues();
  double sep = std::numeric_limits<double>::infinity();
  if (j > 0) sep = std::min(sep, std::abs(lam[j] - lamp[j - 1]));
  if (j + 1 < n) sep = std::min(sep, std::abs(lam[j] - lamp[j + 1]));
  if (!(sep > 0.0)) throw InvalidArgument("separation delta_j is zero; the bound is vacuous");
  const double diff = operator_norm(a - a_prime);
  const double ov = std::abs(ea.eigenvectors().col(j).dot(eb.eigenvectors().col(j)));
  const double measured = std::sqrt(std::max(0.0, 1.0 - ov * ov));
  BoundReport r = make_report(std::isinf(sep) ? 0.0 : kPi / 2.0 * diff / sep, measured);
  r.note("delta_j", sep);
  r.note("perturbation_norm", diff);
  r.note("j", static_cast<double>(j));
  return r;
}

/// max_j |lambda_j - lambda'_j| against ||A - A'||.
inline BoundReport weyl_max_shift(const Matrix& a, const Matrix& a_prime) {
  detail::require_square_pair(a, a_prime);
  detail::require_hermitian(a, "A");
  detail::require_hermitian(a_prime, "A'");
  detail::require_dense_size(a.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a, Eigen::EigenvaluesOnly), eb(a_prime, Eigen::EigenvaluesOnly);
  const double shift = (ea.eigenvalues() - eb.eigenvalues()).cwiseAbs().maxCoeff();
  return make_report(operator_norm(a - a_prime), shift);
}

/// exp(-i t H) for Hermitian H.
inline Matrix evolution(const Matrix& h, double t) {
  detail::require_hermitian(h, "H");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Eigen::VectorXcd phases =
      (es.eigenvalues().cast<cplx>() * cplx(0.0, -t)).array().exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

struct EffectiveHamiltonianReport {
  double t = 0.0;
  /// ||U_tilde - U||, or ||U_tilde - 1|| when no reference is supplied.
  double delta_norm = 0.0;
  double epsilon = 0.0;
  double error_norm = std::numeric_limits<double>::quiet_NaN();
  int series_terms_used = 0;
  bool t_in_range = false;
  bool delta_in_range = false;
  bool series_converged = false;
  bool within_epsilon = false;

  bool hypotheses_hold() const { return t_in_range && delta_in_range; }
};

struct MatrixLogResult {
  Matrix h_tilde;
  EffectiveHamiltonianReport report;
};

inline constexpr double kLogRadius = 2.0 / 3.0;

/// Effective Hamiltonian (i/t) log U_tilde from the series sum_k (-1)^{k+1} (U_tilde - 1)^k / k.
inline MatrixLogResult matrix_log(const Matrix& u_tilde, double t) {
  require(u_tilde.rows() == u_tilde.cols(), "matrix must be square");
  detail::require_dense_size(u_tilde.rows());
  if (!(t > 0.0)) throw InvalidArgument("evolution time must be positive");
  const Eigen::Index n = u_tilde.rows();
  const Matrix d = u_tilde - Matrix::Identity(n, n);
  const double dn = operator_norm(d);
  if (dn > kLogRadius)
    throw InvalidArgument("||U - 1|| = " + format_double(dn) + " exceeds the series radius 2/3");
  Matrix log_u = Matrix::Zero(n, n);
  Matrix power = d;
  int used = 0;
  bool converged = false;
  for (int k = 1; k <= 500; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    log_u += (sign / k) * power;
    used = k;
    power = power * d;
    if (power.norm() / (k + 1) < 1e-14) {
      converged = true;
      break;
    }
  }
  MatrixLogResult out;
  out.h_tilde = cplx(0.0, 1.0 / t) * log_u;
  out.report.t = t;
  out.report.delta_norm = dn;
  out.report.series_terms_used = used;
  out.report.series_converged = converged;
  return out;
}

/// Checks ||H_tilde - H|| <= epsilon for U_tilde approximating exp(-i t H),
/// recording whether ||U_tilde - U|| <= t eps / 9 <= 1/3 and 0 < t <= 1/(4||H||).
inline EffectiveHamiltonianReport effective_error(const Matrix& h, const Matrix& u_tilde, double t,
                                                  double epsilon) {
  detail::require_square_pair(h, u_tilde);
  require(epsilon > 0.0, "epsilon must be positive");
  const Matrix u = evolution(h, t);
  EffectiveHamiltonianReport rep;
  rep.t = t;
  rep.epsilon = epsilon;
  rep.delta_norm = operator_norm(u_tilde - u);
  const double hn = operator_norm(h);
  constexpr double slack = 1.0 + 1e-12;
  rep.t_in_range = t > 0.0 && (hn == 0.0 || t <= slack / (4.0 * hn));
  rep.delta_in_range = rep.delta_norm <= slack * t * epsilon / 9.0 && t * epsilon / 9.0 <= slack / 3.0;
  try {
    const MatrixLogResult ml = matrix_log(u_tilde, t);
    rep.series_terms_used = ml.report.series_terms_used;
    rep.series_converged = ml.report.series_converged;
    rep.error_norm = operator_norm(ml.h_tilde - h);
    rep.within_epsilon = rep.error_norm <= epsilon;
  } catch (const InvalidArgument&) {
    rep.series_converged = false;
  }
  return rep;
}

inline EffectiveHamiltonianReport effective_error(const OperatorSum& h, const Matrix& u_tilde, double t,
                                                  double epsilon) {
  return effective_error(to_dense(h.real_part()), u_tilde, t, epsilon);
}

/// Unitary factor of the polar decomposition.
inline Matrix nearest_unitary(const Matrix& m) {
  require(m.rows() == m.cols(), "matrix must be square");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// Nearest unitary to U + direction, rotated back toward U along the
/// geodesic so that ||result - U|| equals `distance` (at most 1/3).
inline Matrix unitary_at_distance(const Matrix& u, const Matrix& direction, double distance) {
  detail::require_square_pair(u, direction);
  require(distance >= 0.0 && distance <= 1.0 / 3.0, "target distance must lie in [0, 1/3]");
  if (distance == 0.0) return u;
  const double dn = operator_norm(direction);
  require(dn > 0.0, "perturbation direction must be nonzero");
  const Matrix w = u.adjoint() * nearest_unitary(u + direction * (distance / dn));
  // w = exp(-i K) with K Hermitian and small.
  Matrix k = matrix_log(w, 1.0).h_tilde;
  k = (k + k.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(k);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (top == 0.0) return u;
  const double alpha = 2.0 * std::asin(distance / 2.0) / top;
  return u * evolution(k, alpha);
}

/// A lower bound that may have been clamped at zero.
struct LowerBound {
  double value = 0.0;
  double raw = 0.0;
  bool clamped = false;
  operator double() const { return value; }
};

inline LowerBound clamp_at_zero(double raw) { return {std::max(0.0, raw), raw, raw < 0.0}; }

/// Eigenstate fidelity after phase estimation with an epsilon-accurate
/// effective Hamiltonian: 1 - pi^2 eps^2 / gamma^2.
inline LowerBound qpe_fidelity_bound(double gamma_j, double epsilon) {
  if (!(gamma_j > 0.0)) throw InvalidArgument("gap must be positive");
  if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be nonnegative");
  if (epsilon > gamma_j / 2.0) throw InvalidArgument("epsilon exceeds half the gap");
  return clamp_at_zero(1.0 - kPi * kPi * epsilon * epsilon / (gamma_j * gamma_j));
}

/// Squared overlap of perturbed and unperturbed eigenstates:
/// 1 - pi ||H_int|| / (gamma0 - 2 ||H_int||), requiring gamma0 > 2 ||H_int||.
inline LowerBound perturbed_overlap_lb(double gamma0, double hint_norm) {
  if (!(hint_norm >= 0.0)) throw InvalidArgument("interaction norm must be nonnegative");
  if (!(gamma0 > 2.0 * hint_norm))
    throw InvalidArgument("gap " + format_double(gamma0) + " does not exceed twice the interaction norm " +
                          format_double(hint_norm));
  return clamp_at_zero(1.0 - kPi * hint_norm / (gamma0 - 2.0 * hint_norm));
}

struct GapOverlapChain {
  double gap_lb = 0.0;
  double r_squared_lb = 1.0;
};

/// Gap and squared-overlap lower bounds after adding interactions with the given norms.
inline GapOverlapChain gap_overlap_chain(double gamma0, const std::vector<double>& hint_norms) {
  require(gamma0 >= 0.0, "gap must be nonnegative");
  double sum = 0.0, top = 0.0;
  for (double h : hint_norms) {
    require(h >= 0.0, "interaction norms must be nonnegative");
    sum += h;
    top = std::max(top, h);
  }
  GapOverlapChain c;
  c.gap_lb = std::max(gamma0 - 2.0 * sum, 0.0);
  if (c.gap_lb <= 0.0)
    c.r_squared_lb = 0.0;
  else
    c.r_squared_lb = std::max(1.0 - kPi * top / c.gap_lb, 0.0);
  return c;
}

struct SufficiencyReport {
  double c = 0.0;
  double gamma_leaf_min = 0.0;
  /// Per layer k = 0..p-1.
  std::vector<bool> condition_i;
  std::vector<bool> condition_ii;
  bool all_i = true;
  bool all_ii = true;
  /// False only if (ii) held everywhere while (i) failed somewhere.
  bool implication_holds = true;
};

inline constexpr double kMinSufficiencyConstant = 1.0 + kPi / 2.0;

/// Layer conditions for a constant overlap. layer_max[k] is the largest
/// interaction norm on layer k (k = 0 is the root); p = layer_max.size().
inline SufficiencyReport sufficient_conditions(const std::vector<double>& layer_max, double gamma_leaf_min,
                                               double c) {
  if (!(c > kMinSufficiencyConstant))
    throw InvalidArgument("c must exceed 1 + pi/2, got " + format_double(c));
  require(gamma_leaf_min >= 0.0, "leaf gap must be nonnegative");
  const int p = static_cast<int>(layer_max.size());
  SufficiencyReport r;
  r.c = c;
  r.gamma_leaf_min = gamma_leaf_min;
  auto leq = [](double a, double b) { return a <= b + 1e-12 * std::max(1.0, std::abs(b)); };
  for (int k = 0; k < p; ++k) {
    require(layer_max[static_cast<std::size_t>(k)] >= 0.0, "layer norms must be nonnegative");
    double tail = 0.0;
    for (int j = k + 1; j < p; ++j) tail += layer_max[static_cast<std::size_t>(j)];
    const double a = layer_max[static_cast<std::size_t>(k)];
    const bool ci = leq(a, (gamma_leaf_min - 2.0 * tail) / (2.0 * c));
    const double depth = static_cast<double>(p - k);
    const bool cii = leq(a, gamma_leaf_min / (4.0 * c * depth * depth));
    r.condition_i.push_back(ci);
    r.condition_ii.push_back(cii);
    r.all_i = r.all_i && ci;
    r.all_ii = r.all_ii && cii;
  }
  r.implication_holds = !r.all_ii || r.all_i;
  return r;
}

struct PathDiagnostic {
  double value = 0.0;
  double tau_at_max = 0.0;
  /// Grid points where the target level is within 1e-8 of a neighbour; excluded from the maximum.
  std::vector<double> degenerate_taus;
};

/// max over tau of sqrt(<phi_j(tau)| H_int^2 |phi_j(tau)>) / min_{k != j} |E_j(tau) - E_k(tau)|
/// along H(tau) = H0 + tau H_int on a uniform grid over [0, 1].
inline PathDiagnostic path_overlap_diagnostic(const Matrix& h0, const Matrix& h_int, Eigen::Index j,
                                              int grid) {
  detail::require_square_pair(h0, h_int);
  detail::require_hermitian(h0, "H0");
  detail::require_hermitian(h_int, "H_int");
  detail::require_dense_size(h0.rows());
  require(grid >= 2, "grid needs at least two points");
  require(h0.rows() >= 2, "need at least two levels");
  if (j < 0 || j >= h0.rows()) throw InvalidArgument("eigen-index out of range");
  const Matrix h_int_sq = h_int * h_int;
  PathDiagnostic out;
  for (int g = 0; g < grid; ++g) {
    const double tau = static_cast<double>(g) / (grid - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h0 + tau * h_int);
    const auto& e = es.eigenvalues();
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < e.size(); ++k)
      if (k != j) gap = std::min(gap, std::abs(e[j] - e[k]));
    if (gap < 1e-8) {
      out.degenerate_taus.push_back(tau);
      continue;
    }
    const auto v = es.eigenvectors().col(j);
    const double num = std::sqrt(std::max(0.0, v.dot(h_int_sq * v).real()));
    const double q = num / gap;
    if (q > out.value) {
      out.value = q;
      out.tau_at_max = tau;
    }
  }
  return out;
}

inline PathDiagnostic path_overlap_diagnostic(const OperatorSum& h0, const OperatorSum& h_int,
                                              Eigen::Index j, int grid) {
  if (h0.n_qubits() != h_int.n_qubits()) throw DimensionMismatch("H0 and H_int act on different qubit counts");
  return path_overlap_diagnostic(to_dense(h0.real_part()), to_dense(h_int.real_part()), j, grid);
}

}  // namespace dncprep
