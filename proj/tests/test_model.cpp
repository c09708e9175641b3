#include "zonalclear/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_support.hpp"
#include "zonalclear/rng.hpp"

using namespace zonalclear;
using namespace zonalclear::testing;

namespace {

AcceptanceVector no_bids(const Instance& in) { return AcceptanceVector::all_rejected(in); }

// Independent re-evaluation of the objective polynomial, summing in a
// different association order with long doubles.
long double objective_oracle(const Instance& in, const std::vector<double>& x,
                             const AcceptanceVector& y) {
  long double g = 0;
  for (std::size_t i = in.segments.size(); i-- > 0;) {
    const Segment& s = in.segments[i];
    const long double xi = x[i];
    g += static_cast<long double>(s.volume) *
         (static_cast<long double>(s.price_start) * xi +
          (static_cast<long double>(s.price_end) - s.price_start) * xi * xi / 2.0L);
  }
  for (std::size_t b = in.bids.size(); b-- > 0;) {
    if (!y.start[b]) continue;
    const auto* o = in.bids[b].option_for(*y.start[b]);
    for (double v : o->volumes) g += static_cast<long double>(v) * in.bids[b].price;
  }
  return g;
}

}  // namespace

TEST(EvaluateSurplus, SingleDemandSegmentFullyAccepted) {
  Instance in = empty_instance(1, 1, 0, 10);
  in.segments.push_back(demand_seg(0, 0, 10, 0, 100));
  validate(in);
  const double g = evaluate_surplus(in, {1.0}, no_bids(in));
  // 100*10*1 + 100*(0-10)*0.5 = 500
  EXPECT_DOUBLE_EQ(g, 500.0);
}

TEST(EvaluateSurplus, AllZeroIsZero) {
  Instance in = crossing_instance();
  in.bids.push_back(simple_bid("B0", 0, 5.0, 0, {10.0}));
  validate(in);
  AcceptanceVector y = AcceptanceVector::all_rejected(in);
  EXPECT_DOUBLE_EQ(evaluate_surplus(in, {0.0, 0.0}, y), 0.0);
}

TEST(EvaluateSurplus, MatchesIndependentPolynomialOnRandomInputs) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Instance in = empty_instance(1, 2, 0, 100);
    in.segments.push_back(supply_seg(0, 0, 0, 60, rng.uniform(10, 200)));
    in.segments.push_back(supply_seg(0, 0, 60, 100, rng.uniform(10, 200)));
    in.segments.push_back(demand_seg(0, 0, 100, 30, rng.uniform(10, 200)));
    in.segments.push_back(demand_seg(0, 1, 100, 0, rng.uniform(10, 200)));
    in.bids.push_back(simple_bid("B0", 0, rng.uniform(10, 90), 0,
                                 {rng.uniform(1, 20), rng.uniform(1, 20)}));
    validate(in);
    std::vector<double> x;
    for (std::size_t i = 0; i < in.segments.size(); ++i) x.push_back(rng.uniform());
    AcceptanceVector y = AcceptanceVector::all_rejected(in);
    if (rng.bernoulli(0.5)) y.start[0] = 0;
    const double got = evaluate_surplus(in, x, y);
    const double want = static_cast<double>(objective_oracle(in, x, y));
    EXPECT_NEAR(got, want, 1e-9 * (1.0 + std::abs(want)));
  }
}

TEST(EvaluateSurplus, InvariantUnderSegmentReordering) {
  Rng rng(11);
  Instance in = empty_instance(1, 1, 0, 100);
  in.segments.push_back(supply_seg(0, 0, 0, 40, 120));
  in.segments.push_back(supply_seg(0, 0, 40, 100, 80));
  in.segments.push_back(demand_seg(0, 0, 100, 50, 90));
  in.segments.push_back(demand_seg(0, 0, 50, 0, 60));
  std::vector<double> x = {0.3, 0.9, 0.5, 0.1};
  const double base = evaluate_surplus(in, x, no_bids(in));
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  Instance shuffled = in;
  std::vector<double> xs(x.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.segments[i] = in.segments[perm[i]];
    xs[i] = x[perm[i]];
  }
  EXPECT_DOUBLE_EQ(evaluate_surplus(shuffled, xs, no_bids(shuffled)), base);
}

TEST(EvaluateSurplus, ConcaveInFractionsForFixedAcceptance) {
  Rng rng(13);
  Instance in = empty_instance(1, 1, 0, 100);
  in.segments.push_back(supply_seg(0, 0, 0, 50, 100));
  in.segments.push_back(supply_seg(0, 0, 50, 100, 70));
  in.segments.push_back(demand_seg(0, 0, 100, 20, 120));
  const auto y = no_bids(in);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a, b, mid;
    const double lam = rng.uniform();
    for (std::size_t i = 0; i < in.segments.size(); ++i) {
      a.push_back(rng.uniform());
      b.push_back(rng.uniform());
      mid.push_back(lam * a.back() + (1 - lam) * b.back());
    }
    const double gmid = evaluate_surplus(in, mid, y);
    const double bound = lam * evaluate_surplus(in, a, y) +
                         (1 - lam) * evaluate_surplus(in, b, y);
    EXPECT_GE(gmid, bound - 1e-9);
  }
}

TEST(EvaluateSurplus, ShapeErrors) {
  Instance in = crossing_instance();
  EXPECT_THROW(evaluate_surplus(in, {1.0}, no_bids(in)), std::invalid_argument);
  AcceptanceVector bad;
  bad.start.assign(3, std::nullopt);
  EXPECT_THROW(evaluate_surplus(in, {1.0, 1.0}, bad), std::invalid_argument);
}

TEST(BidSurplus, DemandAboveAllPricesIsPositive) {
  Instance in = empty_instance(1, 2, 0, 100);
  in.bids.push_back(simple_bid("B0", 0, 80.0, 0, {10.0, 15.0}));
  const std::vector<std::vector<double>> p = {{40.0, 50.0}};
  EXPECT_GT(bid_surplus(in, 0, 0, p), 0.0);
}

TEST(BidSurplus, PriceEqualEverywhereIsZero) {
  Instance in = empty_instance(1, 2, 0, 100);
  in.bids.push_back(simple_bid("B0", 0, 42.0, 0, {10.0, 15.0}));
  const std::vector<std::vector<double>> p = {{42.0, 42.0}};
  EXPECT_DOUBLE_EQ(bid_surplus(in, 0, 0, p), 0.0);
}

TEST(BidSurplus, SupplyExampleArithmetic) {
  Instance in = empty_instance(1, 2, 0, 100);
  in.bids.push_back(simple_bid("B0", 0, 50.0, 0, {-10.0, -10.0}));
  const std::vector<std::vector<double>> p = {{40.0, 60.0}};
  // (50-40)(-10) + (50-60)(-10) = 0
  EXPECT_DOUBLE_EQ(bid_surplus(in, 0, 0, p), 0.0);
}

TEST(BidSurplus, StartOutsideAllowedSetIsDomainError) {
  Instance in = empty_instance(1, 2, 0, 100);
  in.bids.push_back(simple_bid("B0", 0, 50.0, 0, {-10.0}));
  const std::vector<std::vector<double>> p = {{40.0, 60.0}};
  EXPECT_THROW(bid_surplus(in, 0, 1, p), std::domain_error);
}

namespace {

ClearingOutcome empty_outcome(const Instance& in) {
  ClearingOutcome out;
  out.fraction.assign(in.segments.size(), 0.0);
  out.price.assign(static_cast<std::size_t>(in.zones),
                   std::vector<double>(static_cast<std::size_t>(in.periods), in.price_min));
  const auto T = static_cast<std::size_t>(in.periods);
  out.flow.assign(in.lines.size(), std::vector<double>(T, 0.0));
  out.mu_upper = out.flow;
  out.mu_lower = out.flow;
  out.rho_upper = out.flow;
  out.rho_lower = out.flow;
  return out;
}

}  // namespace

TEST(Audit, VacuousInstancePassesEverything) {
  Instance in = empty_instance(2, 3, 0, 100);
  in.lines.push_back(make_line("L0", 0, 1, 3, 0.0));
  in.initial_flow.push_back(0.0);
  validate(in);
  const auto out = empty_outcome(in);
  const auto rep = audit(in, out, no_bids(in));
  EXPECT_TRUE(rep.all_pass()) << rep.summary();
}

TEST(Audit, Family6FailsOnRejectedPositiveSurplusBid) {
  // demand bid priced above the reported price: accepted passes, rejected fails
  Instance in = crossing_instance();
  in.bids.push_back(simple_bid("B0", 0, 9.0, 0, {5.0}));
  validate(in);

  ClearingOutcome out = empty_outcome(in);
  out.price[0][0] = 5.0;
  out.fraction = {0.5, 0.45};  // balance: -50 + 45 + 5 = 0 with the bid accepted
  AcceptanceVector y = AcceptanceVector::all_rejected(in);
  y.start[0] = 0;
  out.surplus = evaluate_surplus(in, out.fraction, y);
  auto rep = audit(in, out, y);
  EXPECT_TRUE(rep.family(6).pass);

  // flip to rejected while the surplus is positive: family (6) must fail
  AcceptanceVector rejected = AcceptanceVector::all_rejected(in);
  ClearingOutcome out2 = empty_outcome(in);
  out2.price[0][0] = 5.0;
  out2.fraction = {0.5, 0.5};
  auto rep2 = audit(in, out2, rejected);
  EXPECT_FALSE(rep2.family(6).pass);
  EXPECT_NEAR(rep2.family(6).worst, (9.0 - 5.0) * 5.0, 1e-12);
}

TEST(Audit, Family4DetectsOrphanedChild) {
  Instance in = crossing_instance();
  in.bids.push_back(simple_bid("M", 0, 5.0, 0, {1.0}));
  in.bids.push_back(simple_bid("C", 0, 5.0, 0, {1.0}, "M"));
  validate(in);
  auto out = empty_outcome(in);
  AcceptanceVector y = AcceptanceVector::all_rejected(in);
  y.start[1] = 0;  // child accepted, mother rejected
  const auto rep = audit(in, out, y);
  EXPECT_FALSE(rep.family(4).pass);
}

TEST(Audit, Family5RespectsInfiniteRamp) {
  Instance in = empty_instance(2, 2, 0, 10);
  in.segments.push_back(supply_seg(0, 0, 0, 10, 100));
  in.segments.push_back(demand_seg(1, 0, 10, 0, 100));
  in.segments.push_back(supply_seg(0, 1, 0, 10, 100));
  in.segments.push_back(demand_seg(1, 1, 10, 0, 100));
  in.lines.push_back(make_line("L0", 0, 1, 2, 500.0));
  in.initial_flow.push_back(0.0);
  validate(in);
  auto out = empty_outcome(in);
  out.flow[0] = {400.0, -400.0};  // huge swing, no finite ramp
  const auto rep = audit(in, out, no_bids(in));
  EXPECT_TRUE(rep.family(5).pass);

  Instance ramped = in;
  ramped.lines[0].ramp_limit.assign(2, 100.0);
  const auto rep2 = audit(ramped, out, no_bids(ramped));
  EXPECT_FALSE(rep2.family(5).pass);
}

TEST(Audit, Family12ChecksBothEquationForms) {
  Instance in = empty_instance(2, 2, 0, 10);
  in.lines.push_back(make_line("L0", 0, 1, 2, 500.0, 50.0));
  in.initial_flow.push_back(0.0);
  validate(in);
  auto out = empty_outcome(in);
  // prices equal, all duals zero: both period equations hold
  EXPECT_TRUE(audit(in, out, no_bids(in)).family(12).pass);
  // rho at t=1 enters the t=0 equation with a minus sign
  out.rho_upper[0][1] = 2.0;
  out.flow[0] = {0.0, 50.0};  // make (10) complementary at t=1
  auto rep = audit(in, out, no_bids(in));
  EXPECT_FALSE(rep.family(12).pass);
  EXPECT_TRUE(rep.family(10).pass);
}

TEST(Audit, Family13And14FillOrderAndPriceFormula) {
  Instance in = empty_instance(1, 1, 0, 20);
  in.segments.push_back(supply_seg(0, 0, 0, 10, 100));
  in.segments.push_back(supply_seg(0, 0, 10, 20, 50));
  in.segments.push_back(demand_seg(0, 0, 20, 0, 100));
  validate(in);
  auto out = empty_outcome(in);
  out.fraction = {1.0, 0.2, 0.6};
  out.price[0][0] = 0.0 + 10.0 * 1.0 + 10.0 * 0.2;  // price formula
  auto rep = audit(in, out, no_bids(in));
  EXPECT_TRUE(rep.family(13).pass);
  EXPECT_TRUE(rep.family(14).pass);

  out.fraction = {0.5, 0.2, 0.6};  // second supply partially filled before the first
  rep = audit(in, out, no_bids(in));
  EXPECT_FALSE(rep.family(13).pass);

  out.fraction = {1.0, 0.2, 0.6};
  out.price[0][0] = 13.0;  // off the formula
  rep = audit(in, out, no_bids(in));
  EXPECT_FALSE(rep.family(14).pass);
}

TEST(Validate, RejectsBrokenInvariants) {
  {
    Instance in = crossing_instance();
    in.price_min = 10;
    in.price_max = 10;
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
  {
    Instance in = crossing_instance();
    in.segments[0].volume = 5;  // supply must be <= 0
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
  {
    Instance in = crossing_instance();
    in.segments[1].zone = 3;
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
  {
    Instance in = crossing_instance();
    in.bids.push_back(simple_bid("B0", 0, 5, 0, {1.0}, "missing"));
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
  {
    // mother cycle
    Instance in = crossing_instance();
    in.bids.push_back(simple_bid("A", 0, 5, 0, {1.0}, "B"));
    in.bids.push_back(simple_bid("B", 0, 5, 0, {1.0}, "A"));
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
  {
    // mixed profile signs
    Instance in = crossing_instance();
    in.bids.push_back(simple_bid("B0", 0, 5, 0, {1.0, -1.0}));
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
  {
    // non-contiguous supply stack
    Instance in = empty_instance(1, 1, 0, 20);
    in.segments.push_back(supply_seg(0, 0, 5, 10, 100));
    EXPECT_THROW(validate(in), std::invalid_argument);
  }
}

TEST(Validate, AcceptanceShape) {
  Instance in = crossing_instance();
  in.bids.push_back(simple_bid("B0", 0, 5, 2, {1.0}));
  in.periods = 3;
  in.segments.clear();
  in.segments.push_back(supply_seg(0, 0, 0, 10, 100));
  in.segments.push_back(demand_seg(0, 0, 10, 0, 100));
  validate(in);
  AcceptanceVector y = AcceptanceVector::all_rejected(in);
  y.start[0] = 1;  // not an allowed start
  EXPECT_THROW(validate_acceptance(in, y), std::invalid_argument);
  y.start[0] = 2;
  EXPECT_NO_THROW(validate_acceptance(in, y));
}
