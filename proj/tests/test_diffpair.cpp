#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "approx.hpp"

#include <algorithm>
#include <cmath>

#include "gmcsim/analysis.hpp"
#include "gmcsim/diffpair.hpp"
#include "gmcsim/error.hpp"

using namespace gmcsim;
using devmodel::DeviceParams;
using devmodel::Environment;
using diffpair::CompositePairSpec;
using diffpair::DiffPairSpec;
using diffpair::Region;

namespace {

const DeviceParams kParams;           // k' = 300 uA/V^2 at 300 K
const Environment kRef{300.0, 5.0};

// Independent oracle: bisection on the KCL residual in terms of M1's
// overdrive u = vgs1 - vth.
std::pair<double, double> bisect_split(const DiffPairSpec& s, double dvin) {
  const double k = 300e-6;
  auto id1 = [&](double u) { return u > 0 ? 0.5 * k * s.base_wl * s.m * u * u : 0.0; };
  auto id2 = [&](double u) {
    const double v = u - dvin;
    return v > 0 ? 0.5 * k * s.base_wl * s.n * v * v : 0.0;
  };
  double lo = std::max(0.0, dvin);
  double hi = lo + 10.0;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    (id1(mid) + id2(mid) - s.iss > 0 ? hi : lo) = mid;
  }
  const double u = 0.5 * (lo + hi);
  return {id1(u), id2(u)};
}

double fd_delta(const DiffPairSpec& s, double x, double h = 1e-6) {
  return (diffpair::solve_current_split(s, x + h, kParams, kRef).delta() -
          diffpair::solve_current_split(s, x - h, kParams, kRef).delta()) /
         (2.0 * h);
}

const DiffPairSpec kRatioSpecs[] = {
    {10.0, 1.0, 1.0, 100e-6},
    {10.0, 2.0, 1.0, 100e-6},
    {10.0, 5.4, 1.0, 100e-6},
    {10.0, 1.0, 5.4, 100e-6},
};

}  // namespace

TEST_CASE("current split at zero input divides by width") {
  const auto sym = diffpair::solve_current_split({10.0, 1.0, 1.0, 100e-6}, 0.0, kParams, kRef);
  CHECK(sym.id1 == approx(50e-6).epsilon(1e-14));
  CHECK(sym.id2 == approx(50e-6).epsilon(1e-14));
  CHECK(sym.region == Region::both_on);

  const auto asym = diffpair::solve_current_split({10.0, 5.4, 1.0, 100e-6}, 0.0, kParams, kRef);
  CHECK(asym.id1 == approx(100e-6 * 5.4 / 6.4).epsilon(1e-14));
  CHECK(asym.id2 == approx(100e-6 / 6.4).epsilon(1e-14));
  CHECK(asym.region == Region::both_on);
}

TEST_CASE("large inputs steer the whole tail") {
  const DiffPairSpec s{10.0, 1.0, 1.0, 100e-6};
  const auto up = diffpair::solve_current_split(s, 1.0, kParams, kRef);
  CHECK(up.id1 == 100e-6);
  CHECK(up.id2 == 0.0);
  CHECK(up.region == Region::second_cutoff);
  const auto dn = diffpair::solve_current_split(s, -1.0, kParams, kRef);
  CHECK(dn.id1 == 0.0);
  CHECK(dn.region == Region::first_cutoff);
}

TEST_CASE("split matches the bisection oracle") {
  const DiffPairSpec s{10.0, 2.0, 1.0, 100e-6};
  for (double dvin : {0.02, -0.05, 0.0, 0.1, -0.2}) {
    const auto [o1, o2] = bisect_split(s, dvin);
    const auto split = diffpair::solve_current_split(s, dvin, kParams, kRef);
    CHECK(split.id1 == approx(o1).epsilon(1e-12));
    CHECK(split.id2 == approx(o2).scale(100e-6).epsilon(1e-12));
  }
}

TEST_CASE("cutoff bounds") {
  const DiffPairSpec s{10.0, 5.4, 1.0, 100e-6};
  const auto b = diffpair::cutoff_bounds(s, kParams, kRef);
  CHECK(b.hi == approx(std::sqrt(2 * 100e-6 / (300e-6 * 10 * 5.4))).epsilon(1e-14));
  CHECK(b.lo == approx(-std::sqrt(2 * 100e-6 / (300e-6 * 10 * 1.0))).epsilon(1e-14));
  CHECK(diffpair::solve_current_split(s, b.hi * 1.0001, kParams, kRef).region ==
        Region::second_cutoff);
  CHECK(diffpair::solve_current_split(s, b.lo * 1.0001, kParams, kRef).region ==
        Region::first_cutoff);
}

TEST_CASE("conservation and monotonicity over +-3x the cutoff bound") {
  for (const auto& s : kRatioSpecs) {
    const auto b = diffpair::cutoff_bounds(s, kParams, kRef);
    const double span = 3.0 * std::max(-b.lo, b.hi);
    double prev = -s.iss;
    for (double x : analysis::linspace(-span, span, 1001)) {
      const auto split = diffpair::solve_current_split(s, x, kParams, kRef);
      CHECK(std::abs(split.id1 + split.id2 - s.iss) / s.iss < 1e-12);
      CHECK(split.delta() >= prev);
      prev = split.delta();
    }
  }
}

TEST_CASE("symmetric gm at zero input") {
  const DiffPairSpec s{10.0, 1.0, 1.0, 100e-6};
  const double g = diffpair::gm_asymmetric(s, 0.0, kParams, kRef);
  CHECK(g == approx(std::sqrt(3e-7)).epsilon(1e-12));
  CHECK(g == approx(547.7225575051661e-6).epsilon(1e-12));
  CHECK(g == approx(fd_delta(s, 0.0)).epsilon(1e-6));
}

TEST_CASE("closed-form gm matches finite differences inside the conduction window") {
  for (const auto& s : kRatioSpecs) {
    const auto b = diffpair::cutoff_bounds(s, kParams, kRef);
    for (int i = 0; i < 101; ++i) {
      const double x = b.lo + (b.hi - b.lo) * (i + 1) / 102.0;
      CHECK(diffpair::gm_asymmetric(s, x, kParams, kRef) ==
            approx(fd_delta(s, x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("gm vanishes beyond cutoff") {
  for (const auto& s : kRatioSpecs) {
    const auto b = diffpair::cutoff_bounds(s, kParams, kRef);
    CHECK(diffpair::gm_asymmetric(s, b.hi * 1.01, kParams, kRef) == 0.0);
    CHECK(diffpair::gm_asymmetric(s, b.lo * 1.01, kParams, kRef) == 0.0);
  }
}

TEST_CASE("gm peak moves toward the narrow device") {
  for (const auto& s : kRatioSpecs) {
    const auto b = diffpair::cutoff_bounds(s, kParams, kRef);
    const auto xs = analysis::linspace(b.lo, b.hi, 20001);
    double best_x = 0.0;
    double best = -1.0;
    for (double x : xs) {
      const double g = diffpair::gm_asymmetric(s, x, kParams, kRef);
      if (g > best) {
        best = g;
        best_x = x;
      }
    }
    if (s.n > s.m) CHECK(best_x > 0.0);
    if (s.n < s.m) CHECK(best_x < 0.0);
    if (s.n == s.m) CHECK(std::abs(best_x) <= xs[1] - xs[0]);
  }
}

TEST_CASE("symmetric gm curve") {
  const DiffPairSpec s{10.0, 1.0, 1.0, 100e-6};
  const double g0 = diffpair::gm_symmetric(s, 0.0, kParams, kRef);
  for (double x : analysis::linspace(-0.3, 0.3, 601)) {
    const double g = diffpair::gm_symmetric(s, x, kParams, kRef);
    CHECK(g <= g0);
    CHECK(g == approx(diffpair::gm_symmetric(s, -x, kParams, kRef)).epsilon(1e-14));
    CHECK(g == diffpair::gm_asymmetric(s, x, kParams, kRef));
  }
  CHECK_THROWS_AS(diffpair::gm_symmetric({10.0, 2.0, 1.0, 100e-6}, 0.0, kParams, kRef),
                  PreconditionError);
}

TEST_CASE("composite pair symmetry") {
  const auto c = CompositePairSpec::mirrored({10.0, 5.4, 1.0, 100e-6});
  CHECK(c.is_mirrored());
  CHECK(diffpair::delta_id_composite(c, 0.0, kParams, kRef) == 0.0);
  for (double x : analysis::linspace(0.0, 0.3, 301)) {
    CHECK(diffpair::gm_composite(c, x, kParams, kRef) ==
          approx(diffpair::gm_composite(c, -x, kParams, kRef)).epsilon(1e-12));
    CHECK(diffpair::delta_id_composite(c, -x, kParams, kRef) ==
          approx(-diffpair::delta_id_composite(c, x, kParams, kRef)).scale(1e-6).epsilon(1e-12));
  }
}

TEST_CASE("composite of two symmetric pairs doubles the symmetric gm") {
  const DiffPairSpec s{10.0, 1.0, 1.0, 100e-6};
  const CompositePairSpec c(s, s);
  CHECK(c.is_mirrored());
  for (double x : {-0.1, 0.0, 0.05})
    CHECK(diffpair::gm_composite(c, x, kParams, kRef) ==
          approx(2.0 * diffpair::gm_symmetric(s, x, kParams, kRef)).epsilon(1e-14));
}

TEST_CASE("composite derivative matches its gm") {
  const auto c = CompositePairSpec::mirrored({10.0, 5.4, 1.0, 100e-6});
  const double h = 1e-6;
  // Stay inside the narrower conduction window of the two addends.
  const auto b = diffpair::cutoff_bounds(c.pair_a(), kParams, kRef);
  const double lim = 0.95 * std::min(-b.lo, b.hi);
  for (double x : analysis::linspace(-lim, lim, 61)) {
    const double fd = (diffpair::delta_id_composite(c, x + h, kParams, kRef) -
                       diffpair::delta_id_composite(c, x - h, kParams, kRef)) /
                      (2.0 * h);
    CHECK(diffpair::gm_composite(c, x, kParams, kRef) == approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("composite addends peak on opposite sides") {
  const auto c = CompositePairSpec::mirrored({10.0, 5.4, 1.0, 100e-6});
  auto argmax = [&](const DiffPairSpec& s) {
    double best_x = 0.0;
    double best = -1.0;
    for (double x : analysis::linspace(-0.5, 0.5, 20001)) {
      const double g = diffpair::gm_asymmetric(s, x, kParams, kRef);
      if (g > best) {
        best = g;
        best_x = x;
      }
    }
    return best_x;
  };
  const double pa = argmax(c.pair_a());
  const double pb = argmax(c.pair_b());
  CHECK(pa < 0.0);
  CHECK(pb > 0.0);
  CHECK(pa == approx(-pb).epsilon(1e-9));
}

TEST_CASE("composite construction rejects unequal base sizes") {
  CHECK_THROWS_AS(CompositePairSpec({10.0, 2.0, 1.0, 1e-4}, {12.0, 1.0, 2.0, 1e-4}),
                  PreconditionError);
  const CompositePairSpec odd({10.0, 2.0, 1.0, 1e-4}, {10.0, 3.0, 1.0, 1e-4});
  CHECK_FALSE(odd.is_mirrored());
}

TEST_CASE("ratio grid is log spaced and inclusive") {
  const diffpair::RatioGrid g;
  const auto r = g.ratios();
  REQUIRE(r.size() == 200);
  CHECK(r.front() == 1.0);
  CHECK(r.back() == approx(20.0).epsilon(1e-14));
  const double step = std::log(r[1] / r[0]);
  for (std::size_t i = 1; i < r.size(); ++i)
    CHECK(std::log(r[i] / r[i - 1]) == approx(step).epsilon(1e-9));
}

TEST_CASE("flatness search with a vanishing window picks the smallest ratio") {
  const diffpair::RatioGrid g;
  const auto res = diffpair::optimize_flatness({10.0, 1.0, 1.0, 100e-6}, 0.0, g, kParams, kRef);
  CHECK(res.ratio == 1.0);
  CHECK(res.ripple == 0.0);
}

TEST_CASE("flatness search never does worse than the symmetric composite") {
  const diffpair::RatioGrid g;
  const DiffPairSpec base{10.0, 1.0, 1.0, 116.75e-6};
  const auto res = diffpair::optimize_flatness(base, 0.04, g, kParams, kRef);
  const double sym = diffpair::composite_ripple(CompositePairSpec::mirrored(base), 0.04,
                                                g.n_samples, kParams, kRef);
  CHECK(res.ripple <= sym);
  CHECK(res.spec.pair_a().n == base.n);
  CHECK(res.spec.pair_a().m == approx(res.ratio * base.n).epsilon(1e-15));
  CHECK(res.ripple == diffpair::composite_ripple(res.spec, 0.04, g.n_samples, kParams, kRef));
}

TEST_CASE("flatness search improves on the symmetric composite at narrow overdrive") {
  // Small tail: the conduction window is comparable to the 40 mV window, so
  // asymmetric addends widen the flat region.
  const diffpair::RatioGrid g;
  const DiffPairSpec base{10.0, 1.0, 1.0, 5e-6};
  const auto res = diffpair::optimize_flatness(base, 0.04, g, kParams, kRef);
  const double sym = diffpair::composite_ripple(CompositePairSpec::mirrored(base), 0.04,
                                                g.n_samples, kParams, kRef);
  CHECK(res.ratio > 1.0);
  CHECK(res.ripple < sym);
}
