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


#include "dncprep/bounds.hpp"

#include <random>

#include <gtest/gtest.h>

#include "dncprep/spectra.hpp"
#include "test_util.hpp"

using namespace dncprep;
using dncprep::testing::random_hermitian;
using dncprep::testing::spectral_norm;

namespace {

Matrix pauli_z() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

Matrix pauli_x() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

Matrix random_unit_hermitian(std::mt19937_64& rng, Eigen::Index dim) {
  Matrix h = random_hermitian(rng, dim);
  return h / spectral_norm(h);
}

}  // namespace

TEST(DavisKahan, Examples) {
  Matrix d = Matrix::Zero(2, 2);
  d(1, 1) = 1.0;
  const auto same = davis_kahan(d, d, 0);
  EXPECT_EQ(same.bound_value, 0.0);
  EXPECT_NEAR(same.measured_value, 0.0, 1e-12);
  EXPECT_TRUE(same.satisfied);

  const auto r = davis_kahan(pauli_z(), pauli_z() + 0.1 * pauli_x(), 0);
  EXPECT_NEAR(r.bound_value, 0.07834444245330839, 1e-12);
  EXPECT_NEAR(r.measured_value, std::sin(std::atan(0.1) / 2.0), 1e-12);
  EXPECT_NEAR(r.measured_value, 0.049813701880159766, 1e-12);
  EXPECT_TRUE(r.satisfied);
}

TEST(DavisKahan, Errors) {
  const Matrix z = pauli_z();
  EXPECT_THROW(davis_kahan(z, z, 2), InvalidArgument);
  EXPECT_THROW(davis_kahan(z, Matrix::Identity(3, 3), 0), DimensionMismatch);
  // Shifting by 2 makes lambda_0 coincide with lambda'_1.
  const Matrix shifted = z - 2.0 * Matrix::Identity(2, 2);
  EXPECT_THROW(davis_kahan(z, shifted, 0), InvalidArgument);
  Matrix nonherm = Matrix::Zero(2, 2);
  nonherm(0, 1) = 1.0;
  EXPECT_THROW(davis_kahan(nonherm, z, 0), InvalidArgument);
}

TEST(DavisKahan, RandomPairsSatisfyBound) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> scale(0.001, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 63);
    const Matrix a = random_hermitian(rng, dim);
    const Matrix b = a + scale(rng) * random_hermitian(rng, dim);
    const Eigen::Index j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(dim));
    const auto r = davis_kahan(a, b, j);
    EXPECT_TRUE(r.satisfied) << "dim " << dim << " j " << j << " bound " << r.bound_value << " measured "
                             << r.measured_value;
  }
}

TEST(Weyl, Examples) {
  std::mt19937_64 rng(3);
  const Matrix a = random_hermitian(rng, 5);
  EXPECT_NEAR(weyl_max_shift(a, a).measured_value, 0.0, 1e-12);
  const auto shifted = weyl_max_shift(a, a + 0.7 * Matrix::Identity(5, 5));
  EXPECT_NEAR(shifted.measured_value, 0.7, 1e-12);
  EXPECT_NEAR(shifted.bound_value, 0.7, 1e-12);
  EXPECT_TRUE(shifted.satisfied);
  const auto r = weyl_max_shift(pauli_z(), pauli_z() + 0.1 * pauli_x());
  EXPECT_NEAR(r.measured_value, std::sqrt(1.01) - 1.0, 1e-12);
  EXPECT_NEAR(r.bound_value, 0.1, 1e-12);
  EXPECT_THROW(weyl_max_shift(a, pauli_z()), DimensionMismatch);
}

TEST(Weyl, RandomPairsSatisfyBound) {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 63);
    const Matrix a = random_hermitian(rng, dim);
    const Matrix b = a + random_hermitian(rng, dim) * (0.01 * (1 + i % 50));
    EXPECT_TRUE(weyl_max_shift(a, b).satisfied) << i;
  }
}

TEST(MatrixLog, Examples) {
  const auto id = matrix_log(Matrix::Identity(3, 3), 0.5);
  EXPECT_LT(id.h_tilde.norm(), 1e-15);

  const double t = 0.1;
  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = std::exp(cplx(0.0, -t));
  u(1, 1) = std::exp(cplx(0.0, t));
  const auto z = matrix_log(u, t);
  EXPECT_LT((z.h_tilde - pauli_z()).norm(), 1e-12);
  EXPECT_GT(z.report.series_terms_used, 1);
  EXPECT_TRUE(z.report.series_converged);
}

TEST(MatrixLog, RejectsOutsideRadius) {
  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = 1.0;
  u(1, 1) = -1.0;
  try {
    matrix_log(u, 1.0);
    FAIL() << "expected rejection";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  EXPECT_THROW(matrix_log(Matrix::Identity(2, 2), 0.0), InvalidArgument);
}

TEST(MatrixLog, RoundTripOnRandomInstances) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 7);
    const Matrix h = random_hermitian(rng, dim);
    const double t = 1.0 / (4.0 * spectral_norm(h));
    const Matrix u = evolution(h, t);
    const auto ml = matrix_log(u, t);
    const Matrix hh = (ml.h_tilde + ml.h_tilde.adjoint()) / 2.0;
    EXPECT_LT(spectral_norm(evolution(hh, t) - u), 1e-10) << i;
    EXPECT_LT(spectral_norm(ml.h_tilde - h), 1e-9) << i;
  }
}

TEST(EffectiveError, ExactEvolution) {
  std::mt19937_64 rng(42);
  const Matrix h = random_unit_hermitian(rng, 4);
  const auto rep = effective_error(h, evolution(h, 0.25), 0.25, 1e-9);
  EXPECT_LT(rep.error_norm, 1e-10);
  EXPECT_TRUE(rep.within_epsilon);
  EXPECT_TRUE(rep.hypotheses_hold());
}

TEST(EffectiveError, FlagsLongTimes) {
  std::mt19937_64 rng(43);
  const Matrix h = random_unit_hermitian(rng, 4);
  const auto rep = effective_error(h, evolution(h, 0.3), 0.3, 0.5);
  EXPECT_FALSE(rep.t_in_range);
  EXPECT_FALSE(rep.hypotheses_hold());
  EXPECT_TRUE(rep.series_converged);
}

TEST(EffectiveError, OperatorSumOverload) {
  const OperatorSum z(1, {PauliTerm(1.0, {PauliFactor{0, PauliAxis::Z}})});
  const auto rep = effective_error(z, evolution(pauli_z(), 0.25), 0.25, 0.1);
  EXPECT_LT(rep.error_norm, 1e-12);
}

TEST(EffectiveError, PerturbedSweepStaysWithinEpsilon) {
  std::mt19937_64 rng(44);
  const double t = 0.25, eps = 0.5;
  for (int i = 0; i < 100; ++i) {
    const Matrix h = random_unit_hermitian(rng, 4);
    const Matrix u = evolution(h, t);
    const Matrix dir = dncprep::testing::random_hermitian(rng, 4) +
                       cplx(0.0, 1.0) * dncprep::testing::random_hermitian(rng, 4);
    const Matrix ut = unitary_at_distance(u, dir, t * eps / 9.0);
    EXPECT_LT(spectral_norm(ut.adjoint() * ut - Matrix::Identity(4, 4)), 1e-12);
    const auto rep = effective_error(h, ut, t, eps);
    EXPECT_NEAR(rep.delta_norm, t * eps / 9.0, 1e-12);
    EXPECT_TRUE(rep.hypotheses_hold()) << i;
    EXPECT_LE(rep.error_norm, eps) << i;
    EXPECT_TRUE(rep.within_epsilon);
  }
}

TEST(NearestUnitary, PolarFactor) {
  std::mt19937_64 rng(45);
  const Matrix m = random_hermitian(rng, 3) + cplx(0, 1) * random_hermitian(rng, 3);
  const Matrix w = nearest_unitary(m);
  EXPECT_LT((w.adjoint() * w - Matrix::Identity(3, 3)).norm(), 1e-12);
  // W^dag M is the Hermitian positive factor.
  const Matrix p = w.adjoint() * m;
  EXPECT_LT((p - p.adjoint()).norm(), 1e-10);
  Eigen::SelfAdjointEigenSolver<Matrix> es((p + p.adjoint()) / 2.0);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(QpeFidelity, Examples) {
  EXPECT_EQ(qpe_fidelity_bound(1.0, 0.0).value, 1.0);
  EXPECT_NEAR(qpe_fidelity_bound(1.23607, 0.05), 0.9838507029872194, 1e-12);
  const auto edge = qpe_fidelity_bound(1.0, 0.5);
  EXPECT_EQ(edge.value, 0.0);
  EXPECT_TRUE(edge.clamped);
  EXPECT_NEAR(edge.raw, 1.0 - kPi * kPi / 4.0, 1e-15);
  EXPECT_THROW(qpe_fidelity_bound(1.0, 0.51), InvalidArgument);
  EXPECT_THROW(qpe_fidelity_bound(0.0, 0.0), InvalidArgument);
}

TEST(PerturbedOverlap, Examples) {
  EXPECT_EQ(perturbed_overlap_lb(3.0, 0.0).value, 1.0);
  EXPECT_NEAR(perturbed_overlap_lb(10.0, 1.0), 1.0 - kPi / 8.0, 1e-15);
  EXPECT_NEAR(perturbed_overlap_lb(10.0, 1.0), 0.6073009183012759, 1e-12);
  EXPECT_THROW(perturbed_overlap_lb(2.0, 1.0), InvalidArgument);
  EXPECT_TRUE(perturbed_overlap_lb(2.5, 1.0).clamped);
}

TEST(PerturbedOverlap, DenseCrossCheck) {
  std::mt19937_64 rng(46);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng() % 63);
    const Matrix h0 = random_hermitian(rng, dim);
    Eigen::SelfAdjointEigenSolver<Matrix> e0(h0);
    const double gamma0 = e0.eigenvalues()[1] - e0.eigenvalues()[0];
    if (gamma0 <= 0.2) continue;
    Matrix hint = random_hermitian(rng, dim);
    const double max_norm = (gamma0 - 0.1) / 2.0;
    hint *= frac(rng) * max_norm / spectral_norm(hint);
    const double hn = spectral_norm(hint);
    ASSERT_GT(gamma0, 2.0 * hn + 0.1 - 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> e1(h0 + hint);
    const double ov = std::abs(e0.eigenvectors().col(0).dot(e1.eigenvectors().col(0)));
    EXPECT_GE(ov * ov, perturbed_overlap_lb(gamma0, hn).value - 1e-12) << i;
  }
}

TEST(GapOverlapChain, Examples) {
  const auto none = gap_overlap_chain(3.5, {});
  EXPECT_EQ(none.gap_lb, 3.5);
  EXPECT_EQ(none.r_squared_lb, 1.0);
  const auto two = gap_overlap_chain(10.0, {1.0, 1.0});
  EXPECT_NEAR(two.gap_lb, 6.0, 1e-15);
  EXPECT_NEAR(two.r_squared_lb, 0.4764012244017012, 1e-12);
  const auto closed = gap_overlap_chain(1.0, {1.0});
  EXPECT_EQ(closed.gap_lb, 0.0);
  EXPECT_EQ(closed.r_squared_lb, 0.0);
}

TEST(GapOverlapChain, AppendingNeverIncreases) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double g = 10.0 * u(rng);
    std::vector<double> norms;
    auto prev = gap_overlap_chain(g, norms);
    for (int k = 0; k < 8; ++k) {
      norms.push_back(0.5 * u(rng));
      const auto next = gap_overlap_chain(g, norms);
      EXPECT_LE(next.gap_lb, prev.gap_lb);
      EXPECT_LE(next.r_squared_lb, prev.r_squared_lb);
      prev = next;
    }
  }
}

TEST(SufficientConditions, Examples) {
  const auto zero = sufficient_conditions({0.0, 0.0, 0.0}, 1.0, 3.0);
  EXPECT_TRUE(zero.all_i);
  EXPECT_TRUE(zero.all_ii);

  const double gamma = 0.8, c = 3.0;
  std::vector<double> edge;
  for (int k = 0; k < 3; ++k) edge.push_back(gamma / (4.0 * c * (3 - k) * (3 - k)));
  const auto b = sufficient_conditions(edge, gamma, c);
  EXPECT_TRUE(b.all_ii);
  EXPECT_TRUE(b.all_i);
  EXPECT_TRUE(b.implication_holds);

  const auto bad = sufficient_conditions({gamma, 0.0, 0.0}, gamma, kMinSufficiencyConstant + 1e-9);
  EXPECT_FALSE(bad.condition_ii[0]);
  EXPECT_FALSE(bad.all_ii);

  EXPECT_THROW(sufficient_conditions({0.0}, 1.0, kMinSufficiencyConstant), InvalidArgument);
}

TEST(SufficientConditions, ImplicationOnRandomProfiles) {
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int all_ii_seen = 0;
  for (int i = 0; i < 100; ++i) {
    const int p = 1 + static_cast<int>(rng() % 8);
    const double gamma = 0.1 + u(rng);
    const double c = kMinSufficiencyConstant + 3.0 * u(rng) + 1e-6;
    std::vector<double> layers;
    for (int k = 0; k < p; ++k) {
      const double cap = gamma / (4.0 * c * (p - k) * (p - k));
      layers.push_back(cap * (i % 2 == 0 ? u(rng) : 2.0 * u(rng)));
    }
    const auto r = sufficient_conditions(layers, gamma, c);
    all_ii_seen += r.all_ii;
    EXPECT_TRUE(r.implication_holds) << i;
  }
  EXPECT_GT(all_ii_seen, 40);
}

TEST(PathDiagnostic, Examples) {
  const Matrix z = pauli_z();
  EXPECT_EQ(path_overlap_diagnostic(z, Matrix::Zero(2, 2), 0, 11).value, 0.0);
  const auto d = path_overlap_diagnostic(z, 0.1 * pauli_x(), 0, 101);
  EXPECT_NEAR(d.value, 0.05, 1e-12);
  EXPECT_EQ(d.tau_at_max, 0.0);
  EXPECT_TRUE(d.degenerate_taus.empty());
}

TEST(PathDiagnostic, TwoPointGridUsesEndpoints) {
  std::mt19937_64 rng(49);
  const Matrix h0 = random_hermitian(rng, 6);
  const Matrix hi = 0.3 * random_hermitian(rng, 6);
  auto quotient = [&](double tau) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h0 + tau * hi);
    const auto v = es.eigenvectors().col(0);
    const double gap = es.eigenvalues()[1] - es.eigenvalues()[0];
    return std::sqrt((hi * v).squaredNorm()) / gap;
  };
  const auto d = path_overlap_diagnostic(h0, hi, 0, 2);
  EXPECT_NEAR(d.value, std::max(quotient(0.0), quotient(1.0)), 1e-12);
}

TEST(PathDiagnostic, ReportsDegeneratePoints) {
  // Z + tau(-2Z) crosses at tau = 1/2.
  const auto d = path_overlap_diagnostic(pauli_z(), -2.0 * pauli_z(), 0, 3);
  ASSERT_EQ(d.degenerate_taus.size(), 1u);
  EXPECT_EQ(d.degenerate_taus[0], 0.5);
  EXPECT_THROW(path_overlap_diagnostic(pauli_z(), pauli_z(), 0, 1), InvalidArgument);
}
