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


#include "dncprep/prep.hpp"

#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace dncprep;
using dncprep::testing::term;

namespace {

OperatorSum chain(int n) {
  std::vector<PauliTerm> ts;
  for (int i = 0; i < n; ++i) ts.push_back(term(1.0, {{i, 'Z'}}));
  for (int i = 0; i + 1 < n; ++i) ts.push_back(term(1.0, {{i, 'X'}, {i + 1, 'X'}}));
  return OperatorSum(n, std::move(ts));
}

OperatorSum fields_only(int n) {
  std::vector<PauliTerm> ts;
  for (int i = 0; i < n; ++i) ts.push_back(term(0.5 + 0.25 * i, {{i, 'Z'}}));
  return OperatorSum(n, std::move(ts));
}

TreeSpectra chain_spectra(int p) {
  const int n = 1 << p;
  return TreeSpectra(decompose(chain(n), even_spans(n, p), p));
}

const double kSqrt5 = std::sqrt(5.0);
const double kP1Overlap = (2.0 + kSqrt5) / std::sqrt(1.0 + (2.0 + kSqrt5) * (2.0 + kSqrt5));
// Independent numpy oracle: |<ground of 4-spin chain | ground(2) (x) ground(2)>|.
constexpr double kP2RootOverlap = 0.957780606454097;

// Expected query counts of the truncated repeat-until-success recursion,
// evaluated level by level for a tree whose nodes at equal depth are identical.
struct Expectation {
  double n_v = 1.0;
  double n_u = 0.0;
  double fail = 0.0;
};

struct Level {
  double q;        // merge success probability
  double u_cost;   // U applications per merge attempt
};

// levels[0] is the root; leaves are implicit below the last level.
Expectation expected_counts(const std::vector<Level>& levels, std::size_t depth, double delta,
                            double r_lb) {
  if (depth == levels.size()) return {};
  const Expectation child = expected_counts(levels, depth + 1, delta / 3.0, r_lb);
  const double k = std::ceil(std::log(3.0 / delta) * kPi * kPi / (4.0 * r_lb * r_lb));
  const double q = levels[depth].q;
  const double ok = 1.0 - child.fail;
  const double a = ok * ok * (1.0 - q);
  double geo = 0.0, term_r = 1.0;
  for (int r = 0; r < static_cast<int>(k); ++r) {
    geo += term_r;
    term_r *= a;
  }
  Expectation e;
  e.n_v = (child.n_v + ok * child.n_v) * geo;
  e.n_u = (child.n_u + ok * child.n_u + ok * ok * levels[depth].u_cost) * geo;
  e.fail = 1.0 - geo * ok * ok * q;
  return e;
}

}  // namespace

TEST(Repetitions, Examples) {
  EXPECT_EQ(repetitions(1.0, 1.0 / 3.0), 3u);
  EXPECT_EQ(repetitions(1.0, 1.0 - 1e-12), 1u);
  EXPECT_EQ(repetitions(0.5, 1.0 / 3.0), 11u);
  EXPECT_THROW(repetitions(0.0, 0.1), InvalidArgument);
  EXPECT_THROW(repetitions(1.1, 0.1), InvalidArgument);
  EXPECT_THROW(repetitions(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(repetitions(1.0, 1.0), InvalidArgument);
}

TEST(Repetitions, GuaranteesBudget) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.999);
  for (int i = 0; i < 500; ++i) {
    const double r = u(rng), d = u(rng);
    const double xi = 4.0 * r * r / (kPi * kPi);
    EXPECT_LE(std::pow(1.0 - xi, static_cast<double>(repetitions(r, d))), d * (1.0 + 1e-12));
  }
}

TEST(AnalyticBounds, Examples) {
  const auto b0 = analytic_bounds(0, 0.3, 0.2, 1.0, 2.0, 7.0, 3.0);
  EXPECT_EQ(b0.n_v, 7.0);
  EXPECT_EQ(b0.n_u, 0.0);
  const auto b1 = analytic_bounds(1, 1.0, 1.0 / 3.0, 2.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(b1.exponent, 3.967440966398527, 1e-12);
  EXPECT_NEAR(b1.n_v, 15.642952872679118, 1e-9);
  EXPECT_NEAR(b1.n_u, 2.0 * 15.642952872679118, 1e-9);
  const auto half = analytic_bounds(1, 0.5, 1.0 / 3.0, 2.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(half.n_v, 62.571811490716485, 1e-9);
  EXPECT_GT(half.n_v, b1.n_v);
  EXPECT_THROW(analytic_bounds(1, 0.0, 0.1, 2.0, 1.0), InvalidArgument);
  EXPECT_THROW(analytic_bounds(1, 1.0, 1.0, 2.0, 1.0), InvalidArgument);
  EXPECT_THROW(analytic_bounds(1, 1.0, 0.1, 0.5, 1.0), InvalidArgument);
  EXPECT_THROW(analytic_bounds(-1, 1.0, 0.1, 2.0, 1.0), InvalidArgument);
}

TEST(AnalyticBounds, MonotoneInOverlapAndDelta) {
  for (int p = 1; p <= 5; ++p) {
    double prev = 0.0;
    for (double r = 1.0; r > 0.05; r -= 0.05) {
      const double v = analytic_bounds(p, r, 0.1, 3.0, 1.0).n_v;
      EXPECT_GT(v, prev);
      prev = v;
    }
    EXPECT_GT(analytic_bounds(p, 0.8, 0.01, 3.0, 1.0).n_v, analytic_bounds(p, 0.8, 0.1, 3.0, 1.0).n_v);
  }
}

TEST(BudgetSplit, HoldsOnRandomDraws) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng);
    const int n = 1 + static_cast<int>(rng() % 100);
    EXPECT_TRUE(budget_split_check(d, n).holds) << d << " " << n;
  }
  EXPECT_TRUE(budget_split_check(0.0, 5).holds);
  EXPECT_TRUE(budget_split_check(1.0, 1).holds);
}

TEST(TreeSpectra, ChainHeightOne) {
  const auto sp = chain_spectra(1);
  const auto& root = sp.node(NodeLabel::root());
  EXPECT_NEAR(root.energy, -kSqrt5, 1e-12);
  EXPECT_NEAR(root.gap, kSqrt5 - 1.0, 1e-12);
  EXPECT_NEAR(root.norm, kSqrt5, 1e-12);
  EXPECT_NEAR(root.child_overlap, kP1Overlap, 1e-12);
  EXPECT_NEAR(root.interaction_norm, 1.0, 1e-12);
  EXPECT_NEAR(sp.node(NodeLabel::parse("0")).gap, 2.0, 1e-12);
  EXPECT_EQ(sp.node(NodeLabel::parse("1")).child_overlap, 1.0);
  EXPECT_NEAR(sp.max_norm(NodeLabel::root()), kSqrt5, 1e-12);
  EXPECT_NEAR(sp.min_gap(NodeLabel::root()), kSqrt5 - 1.0, 1e-12);
}

TEST(TreeSpectra, ChainHeightTwoOverlaps) {
  const auto sp = chain_spectra(2);
  EXPECT_NEAR(sp.node(NodeLabel::root()).child_overlap, kP2RootOverlap, 1e-10);
  EXPECT_NEAR(sp.node(NodeLabel::parse("0")).child_overlap, kP1Overlap, 1e-12);
  EXPECT_NEAR(sp.min_child_overlap(NodeLabel::root()), kP2RootOverlap, 1e-10);
  EXPECT_NEAR(sp.min_child_overlap(NodeLabel::parse("1")), kP1Overlap, 1e-12);
}

TEST(Merge, SuccessProbabilities) {
  const auto sp = chain_spectra(1);
  const auto& root = sp.node(NodeLabel::root());
  const double q = QpeModel{}.success_probability(root.child_overlap * root.child_overlap);
  EXPECT_NEAR(q, 0.9472135954999579, 1e-12);

  const auto free_tree = TreeSpectra(decompose(fields_only(2), even_spans(2, 1), 1));
  const double r = free_tree.node(NodeLabel::root()).child_overlap;
  EXPECT_NEAR(QpeModel{}.success_probability(r * r), 1.0, 1e-12);
  const QpeModel cleve{QpeKind::PessimisticCleve, 1.0};
  EXPECT_NEAR(cleve.success_probability(r * r), 0.40528473456935109, 1e-12);
}

TEST(Merge, EmpiricalFrequencyAndCost) {
  const auto sp = chain_spectra(1);
  const auto& c0 = sp.node(NodeLabel::parse("0")).ground;
  const auto& c1 = sp.node(NodeLabel::parse("1")).ground;
  Rng rng(123, 0);
  int wins = 0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    const auto m = merge(sp, NodeLabel::root(), c0, c1, QpeModel{}, rng);
    EXPECT_EQ(m.u_applications, 2u);
    wins += m.success;
  }
  const double q = 0.9472135954999579;
  EXPECT_NEAR(wins / static_cast<double>(trials), q, 4.0 * std::sqrt(q * (1 - q) / trials));
  EXPECT_THROW(merge(sp, NodeLabel::parse("0"), c0, c1, QpeModel{}, rng), InvalidArgument);
  EXPECT_THROW(merge(sp, NodeLabel::root(), c0, sp.node(NodeLabel::root()).ground, QpeModel{}, rng),
               DimensionMismatch);
}

TEST(Merge, OrthogonalChildrenNeverSucceed) {
  const auto sp = chain_spectra(1);
  const auto& ground = sp.node(NodeLabel::root()).ground;
  // |01> has no overlap with the even-parity ground state.
  const auto s0 = StateVector::basis(1, 0), s1 = StateVector::basis(1, 1);
  EXPECT_LT(overlap_abs(ground, tensor(s0, s1)), 1e-12);
  Rng rng(1, 1);
  for (int i = 0; i < 100; ++i) EXPECT_FALSE(merge(sp, NodeLabel::root(), s0, s1, QpeModel{}, rng).success);
}

TEST(Prepare, SingleLeaf) {
  const TreeSpectra sp(decompose(chain(3), even_spans(3, 0), 0));
  const auto r = prepare(sp, NodeLabel::root(), 0.1, 1.0, {}, 42, 0);
  EXPECT_TRUE(r.succeeded);
  EXPECT_EQ(r.trace.n_v, 1u);
  EXPECT_EQ(r.trace.n_u, 0u);
  ASSERT_TRUE(r.state.has_value());
  EXPECT_NEAR(overlap_abs(*r.state, lowest_eigenpairs(chain(3), 1).ground()), 1.0, 1e-9);
}

TEST(Prepare, NonInteractingTreeAlwaysSucceeds) {
  const TreeSpectra sp(decompose(fields_only(8), even_spans(8, 2), 2));
  for (std::uint64_t run = 0; run < 200; ++run) {
    const auto r = prepare(sp, NodeLabel::root(), 0.05, 1.0, {}, 7, run);
    ASSERT_TRUE(r.succeeded);
    EXPECT_EQ(r.trace.n_v, 4u);
    EXPECT_EQ(r.trace.nodes.at(NodeLabel::root()).attempts, 1u);
  }
}

TEST(Prepare, RefusesDegenerateNodes) {
  const OperatorSum h(2, {term(1.0, {{0, 'Z'}})});
  const TreeSpectra sp(decompose(h, even_spans(2, 1), 1));
  EXPECT_TRUE(sp.node(NodeLabel::parse("1")).degenerate);
  EXPECT_THROW(prepare(sp, NodeLabel::root(), 0.1, 1.0, {}, 1, 0), DegenerateSpectrum);
  EXPECT_NO_THROW(prepare(sp, NodeLabel::parse("0"), 0.1, 1.0, {}, 1, 0));
  Rng rng(1, 0);
  const auto& g = sp.node(NodeLabel::parse("0")).ground;
  EXPECT_THROW(merge(sp, NodeLabel::root(), g, g, QpeModel{}, rng), DegenerateSpectrum);
}

TEST(Prepare, RejectsBadArguments) {
  const auto sp = chain_spectra(1);
  EXPECT_THROW(prepare(sp, NodeLabel::root(), 0.0, 1.0, {}, 1, 0), InvalidArgument);
  EXPECT_THROW(prepare(sp, NodeLabel::root(), 0.1, 0.0, {}, 1, 0), InvalidArgument);
  EXPECT_THROW(prepare(sp, NodeLabel::parse("00"), 0.1, 1.0, {}, 1, 0), InvalidArgument);
}

TEST(Prepare, DeterministicPerSeed) {
  const auto sp = chain_spectra(2);
  PrepOptions opts;
  opts.model.kind = QpeKind::PessimisticCleve;
  for (std::uint64_t run = 0; run < 50; ++run) {
    const auto a = prepare(sp, NodeLabel::root(), 0.1, 0.9, opts, 2024, run);
    const auto b = prepare(sp, NodeLabel::root(), 0.1, 0.9, opts, 2024, run);
    EXPECT_EQ(a.succeeded, b.succeeded);
    EXPECT_EQ(a.trace.n_v, b.trace.n_v);
    EXPECT_EQ(a.trace.n_u, b.trace.n_u);
    for (const auto& [label, c] : a.trace.nodes) {
      EXPECT_EQ(c.attempts, b.trace.nodes.at(label).attempts);
      EXPECT_EQ(c.successes, b.trace.nodes.at(label).successes);
    }
  }
}

TEST(Prepare, TraceTotalsMatchNodeCounters) {
  const auto sp = chain_spectra(2);
  PrepOptions opts;
  opts.model.kind = QpeKind::PessimisticCleve;
  for (std::uint64_t run = 0; run < 300; ++run) {
    const auto r = prepare(sp, NodeLabel::root(), 0.1, 0.9, opts, 11, run);
    std::uint64_t v = 0, u = 0;
    for (const auto& [label, c] : r.trace.nodes) {
      if (sp.tree().is_leaf(label)) {
        v += c.attempts;
      } else {
        u += c.attempts * opts.model.u_cost(sp.node(label).norm, sp.node(label).gap);
      }
      EXPECT_LE(c.successes, c.attempts);
    }
    EXPECT_EQ(v, r.trace.n_v);
    EXPECT_EQ(u, r.trace.n_u);
    if (r.succeeded) {
      EXPECT_GE(r.trace.n_v, 4u);
      EXPECT_GE(overlap_abs(*r.state, lowest_eigenpairs(chain(4), 1).ground()), 1.0 - 1e-9);
    } else {
      EXPECT_FALSE(r.state.has_value());
    }
  }
}

TEST(Prepare, UnboundedRetriesAlwaysSucceed) {
  const auto sp = chain_spectra(2);
  PrepOptions opts;
  opts.model.kind = QpeKind::PessimisticCleve;
  opts.unbounded_retries = true;
  for (std::uint64_t run = 0; run < 300; ++run) {
    const auto r = prepare(sp, NodeLabel::root(), 0.9, 1.0, opts, 5, run);
    EXPECT_TRUE(r.succeeded);
    EXPECT_TRUE(r.trace.unbounded_retries);
  }
}

TEST(ExpectationOracle, MatchesHandComputedSingleLevel) {
  // One merge level: k = 3 rounds at r = 1, delta = 1 gives delta/3 = 1/3.
  const auto e = expected_counts({{0.5, 4.0}}, 0, 1.0, 1.0);
  EXPECT_NEAR(e.n_v, 2.0 * (1 + 0.5 + 0.25), 1e-12);
  EXPECT_NEAR(e.n_u, 4.0 * (1 + 0.5 + 0.25), 1e-12);
  EXPECT_NEAR(e.fail, 0.125, 1e-12);
}

class MonteCarloStats : public ::testing::TestWithParam<std::tuple<int, QpeKind>> {};

TEST_P(MonteCarloStats, MeansAndFailureRateMatchOracle) {
  const auto [p, kind] = GetParam();
  const auto sp = chain_spectra(p);
  const double scale = kind == QpeKind::IdealProjective ? 1.0 : 4.0 / (kPi * kPi);
  std::vector<Level> levels;
  double r_lb = 0.0;
  if (p == 1) {
    levels = {{kP1Overlap * kP1Overlap * scale, 2.0}};
    r_lb = kP1Overlap;
  } else {
    levels = {{kP2RootOverlap * kP2RootOverlap * scale, 7.0}, {kP1Overlap * kP1Overlap * scale, 2.0}};
    r_lb = kP2RootOverlap;
  }
  const double delta = 0.1;
  const Expectation e = expected_counts(levels, 0, delta, r_lb);

  MonteCarloConfig cfg;
  cfg.options.model.kind = kind;
  cfg.delta = delta;
  cfg.runs = 10000;
  cfg.master_seed = 0xC0FFEE + static_cast<std::uint64_t>(p);
  const RunReport rep = run_monte_carlo(sp, cfg);
  EXPECT_NEAR(rep.r_lb, r_lb, 1e-10);
  EXPECT_NEAR(rep.mean_n_v, e.n_v, 3.0 * rep.stderr_n_v);
  EXPECT_NEAR(rep.mean_n_u, e.n_u, 3.0 * rep.stderr_n_u);
  const double sigma = std::sqrt(delta * (1 - delta) / cfg.runs);
  EXPECT_LE(rep.failure_rate, delta + 3 * sigma);
  EXPECT_EQ(rep.bound_violations, 0u);
  EXPECT_LE(static_cast<double>(rep.max_n_v), rep.bound_n_v);
  EXPECT_LE(static_cast<double>(rep.max_n_u), rep.bound_n_u);
  std::uint64_t hist_total = 0;
  for (const auto& [attempts, count] : rep.attempt_histograms.at(NodeLabel::root())) hist_total += count;
  EXPECT_EQ(hist_total, cfg.runs);
}

INSTANTIATE_TEST_SUITE_P(ChainTrees, MonteCarloStats,
                         ::testing::Combine(::testing::Values(1, 2),
                                            ::testing::Values(QpeKind::IdealProjective,
                                                              QpeKind::PessimisticCleve)));
