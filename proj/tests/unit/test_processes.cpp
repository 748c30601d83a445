#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "dynrisk/error.hpp"
#include "dynrisk/processes.hpp"
#include "support.hpp"

using namespace dynrisk;

namespace {

SpacePtr two_by_two() { return make_space(FiniteFilteredSpace::tree({2, 2})); }

// One coin per atom of {θ = s} ∩ F_s.
Event random_theta_event(const FiniteFilteredSpace& sp, const StoppingTime& theta, std::mt19937_64& rng) {
  std::map<std::pair<int, std::size_t>, bool> coin;
  std::vector<bool> in(sp.outcome_count());
  for (std::size_t w = 0; w < in.size(); ++w) {
    const auto key = std::make_pair(theta(w), sp.atom_of(theta(w), w));
    if (!coin.count(key)) coin[key] = uniform01(rng) < 0.5;
    in[w] = coin[key];
  }
  return Event(std::move(in));
}

TerminalDensity random_terminal(const SpacePtr& sp, std::mt19937_64& rng) {
  std::vector<double> h(sp->outcome_count());
  double mean = 0;
  for (std::size_t w = 0; w < h.size(); ++w) mean += sp->prob(w) * (h[w] = 0.1 + uniform01(rng));
  for (double& v : h) v /= mean;
  return TerminalDensity(sp, std::move(h));
}

}  // namespace

TEST(Processes, AdaptednessEnforced) {
  const auto sp = two_by_two();
  EXPECT_THROW(AdaptedProcess(sp, 0, {{1, 2, 3, 4}}), InputError);
  EXPECT_NO_THROW(AdaptedProcess(sp, 1, {{1, 1, 2, 2}, {1, 2, 3, 4}}));
  EXPECT_THROW(AdaptedProcess(sp, 2, {{1, 2, 3, 4}, {0, 0, 0, 0}}), InputError);
}

TEST(Processes, PairingMatchesDirectSum) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto sp = oracle::random_space(rng, 2, 8, 3, trial % 2 == 1);
    const auto x = random_adapted(sp, 0, 3, rng, -2, 2);
    const auto a = oracle::random_density(sp, 0, 3, rng);
    for (int t = 0; t <= 3; ++t) {
      const auto p = pairing(x, a, t, 3);
      for (std::size_t k = 0; k < sp->atom_count(t); ++k) {
        double num = 0;
        for (std::size_t w : sp->atoms(t)[k])
          for (int s = t; s <= 3; ++s) num += sp->prob(w) * x(s, w) * a.delta(s, w);
        EXPECT_NEAR(p[k], num / sp->atom_prob(t, k), 1e-13);
      }
    }
  }
}

TEST(Processes, MembershipDiagnostics) {
  const auto sp = two_by_two();
  const auto u = DensityProcess::uniform(sp, 0, 2);
  EXPECT_TRUE(membership(u, DensityClass::De, 0).ok);

  const DensityProcess neg(sp, 0, {{0.5, 0.5, 0.5, 0.5}, {0.6, 0.6, 0.6, 0.6}, {-0.1, -0.1, -0.1, -0.1}});
  const auto r = membership(neg, DensityClass::A1Plus, 0);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.time, 2);

  const DensityProcess heavy(sp, 0, {{1, 1, 1, 1}, {0, 0, 0, 0}, {0.5, 0.5, 0.5, 0.5}});
  EXPECT_TRUE(membership(heavy, DensityClass::A1Plus, 0).ok);
  EXPECT_FALSE(membership(heavy, DensityClass::D, 0).ok);

  // mass 1 but the tail vanishes after time 0
  const DensityProcess front(sp, 0, {{1, 1, 1, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  EXPECT_TRUE(membership(front, DensityClass::D, 0).ok);
  EXPECT_FALSE(membership(front, DensityClass::De, 0).ok);
}

TEST(Processes, ConcatenationStaysInD) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sp = oracle::random_space(rng, 2, 6, 2 + trial % 2, trial % 3 == 0);
    const int h = sp->horizon();
    const auto a = oracle::random_density(sp, 0, h, rng);
    const auto b = oracle::random_density(sp, 0, h, rng);
    const auto taus = enumerate_stopping_times(*sp, 0, h);
    const auto& theta = taus[rng() % taus.size()];
    const auto ev = random_theta_event(*sp, theta, rng);
    const auto c = concatenate(a, b, theta, ev);
    EXPECT_TRUE(membership(c, DensityClass::D, 0, 1e-10).ok);
    // before θ, or off the event, c follows a
    for (std::size_t w = 0; w < sp->outcome_count(); ++w)
      for (int s = 0; s <= h; ++s)
        if (s < theta(w) || !ev.contains(w)) EXPECT_EQ(c.delta(s, w), a.delta(s, w));
    EXPECT_LE(concatenate(a, a, theta, ev).max_abs_diff(a), 1e-12);
  }
}

TEST(Processes, ConcatenationRescalesTail) {
  const auto sp = two_by_two();
  const DensityProcess a(sp, 0, {{0.5, 0.5, 0.5, 0.5}, {0.2, 0.2, 0.4, 0.4}, {0.3, 0.3, 0.1, 0.1}});
  const DensityProcess b(sp, 0, {{0, 0, 0, 0}, {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}});
  const auto c = concatenate(a, b, StoppingTime::constant(*sp, 1), Event::all(4));
  // remaining mass of a at time 1 is 0.5 on both atoms; b's is 1
  EXPECT_DOUBLE_EQ(c.delta(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c.delta(1, 0), 0.25);
  EXPECT_DOUBLE_EQ(c.delta(2, 3), 0.25);
}

TEST(Processes, PastingPreservesRelevantDensities) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto sp = oracle::random_space(rng, 2, 7, 1 + trial % 3, trial % 2 == 0);
    const auto f = random_terminal(sp, rng);
    const auto g = random_terminal(sp, rng);
    const int s = static_cast<int>(rng() % (sp->horizon() + 1));
    std::vector<bool> in(sp->outcome_count());
    std::vector<bool> coin(sp->atom_count(s));
    for (std::size_t k = 0; k < coin.size(); ++k) coin[k] = uniform01(rng) < 0.5;
    for (std::size_t w = 0; w < in.size(); ++w) in[w] = coin[sp->atom_of(s, w)];
    const Event ev(in);
    const auto p = paste(f, g, s, ev);
    double mean = 0;
    for (std::size_t w = 0; w < in.size(); ++w) {
      EXPECT_GT(p[w], 0.0);
      mean += sp->prob(w) * p[w];
    }
    EXPECT_NEAR(mean, 1.0, 1e-10);
    EXPECT_LE(cond_expect(*sp, p.values(), s).max_abs_diff(cond_expect(*sp, f.values(), s)), 1e-12);
    EXPECT_LE(paste(f, f, s, ev).max_abs_diff(f), 1e-12);
  }
}

TEST(Processes, PasteRejectsUnmeasurableEvent) {
  const auto sp = two_by_two();
  const TerminalDensity f(sp, {1, 1, 1, 1});
  EXPECT_THROW(paste(f, f, 1, Event({true, false, false, false})), InputError);
}

TEST(Processes, NormalizedRestrictionHasUnitMass) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sp = oracle::random_space(rng, 2, 8, 3, true);
    const auto a = oracle::random_density(sp, 0, 3, rng);
    for (int s = 0; s <= 3; ++s) {
      const auto r = normalized_restriction(a, s);
      EXPECT_EQ(r.t_start(), s);
      EXPECT_TRUE(membership(r, DensityClass::De, s).ok);
    }
  }
}

TEST(Processes, ProjectionIndicators) {
  const auto sp = two_by_two();
  const AdaptedProcess x(sp, 0, {{1, 1, 1, 1}, {2, 2, 3, 3}, {4, 5, 6, 7}});
  const StoppingTime tau(*sp, {1, 1, 2, 2});
  const StoppingTime theta(*sp, {1, 1, 2, 2});
  const auto p = project(x, tau, theta);
  EXPECT_EQ(p(0, 0), 0.0);
  EXPECT_EQ(p(1, 2), 0.0);
  EXPECT_EQ(p(1, 0), 2.0);
  EXPECT_EQ(p(2, 0), 2.0);
  EXPECT_EQ(p(2, 3), 7.0);
}

TEST(Processes, GlueOnAtoms) {
  const auto sp = two_by_two();
  const auto u = DensityProcess::uniform(sp, 1, 2);
  const DensityProcess v(sp, 1, {{0.5, 0.5, 0.9, 0.9}, {0.5, 0.5, 0.1, 0.1}});
  const auto g = glue_on_atoms({u, v}, {1, 0}, 1);
  EXPECT_EQ(g.delta(1, 0), 0.5);
  EXPECT_EQ(g.delta(1, 3), 0.5);
  EXPECT_EQ(g.delta(2, 2), 0.5);
}

TEST(Processes, StabilityDetectsMissingPaste) {
  const auto sp = two_by_two();
  const TerminalDensity f(sp, {1.5, 0.5, 1.5, 0.5});
  const TerminalDensity g(sp, {0.5, 1.5, 0.5, 1.5});
  EXPECT_FALSE(stability_check(std::vector<TerminalDensity>{f, g}).stable);
  const TerminalDensity fg(sp, {1.5, 0.5, 0.5, 1.5});
  const TerminalDensity gf(sp, {0.5, 1.5, 1.5, 0.5});
  EXPECT_TRUE(stability_check(std::vector<TerminalDensity>{f, g, fg, gf}).stable);
}
