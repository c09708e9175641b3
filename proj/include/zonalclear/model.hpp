#pragma once

// Domain model for the multi-zone day-ahead clearing problem: hourly curve
// segments, non-convex (block/flexible) bids, zonal lines, surplus
// evaluation, and a per-constraint-family feasibility audit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "zonalclear/common.hpp"

namespace zonalclear {

using ZoneId = std::int32_t;
using Period = std::int32_t;

enum class SegmentKind : std::uint8_t { supply, demand };

// One piece of a piecewise-linear hourly curve. Signed volume convention:
// supply volume <= 0 with price_start < price_end, demand volume >= 0 with
// price_end < price_start.
struct Segment {
  ZoneId zone = 0;
  Period period = 0;
  SegmentKind kind = SegmentKind::supply;
  double price_start = 0;  // price at fraction 0
  double price_end = 0;    // price at fraction 1
  double volume = 0;       // MWh, signed

  double span() const { return price_end - price_start; }
};

// Surplus contribution of a segment at accepted fraction x:
//   Q * P0 * x + Q * (P1 - P0) * x^2 / 2
inline double segment_surplus(const Segment& s, double x) {
  return s.volume * s.price_start * x + s.volume * s.span() * x * x * 0.5;
}

struct Line {
  std::string id;
  ZoneId source = 0;  // flow > 0 leaves this zone
  ZoneId sink = 0;    // flow > 0 enters this zone
  std::vector<double> upper_cap;   // MW per period
  std::vector<double> lower_cap;   // MW per period, usually <= 0
  std::vector<double> ramp_limit;  // MW per period; kInf disables the limit
};

// Volume profile of a non-convex bid if it starts at `start`:
// volumes[k] applies to period start + k, zero elsewhere.
struct BidOption {
  Period start = 0;
  std::vector<double> volumes;  // MWh, signed, one sign per bid
};

struct NonConvexBid {
  std::string id;
  ZoneId zone = 0;
  double price = 0;                   // money/MWh
  std::vector<BidOption> options;     // allowed starts, ascending, unique
  std::optional<std::string> mother;  // acceptance requires the mother accepted

  const BidOption* option_for(Period start) const {
    for (const auto& o : options)
      if (o.start == start) return &o;
    return nullptr;
  }

  // Q_{b, start, t}
  double volume_at(Period start, Period t) const {
    const BidOption* o = option_for(start);
    if (o == nullptr) return 0.0;
    const Period k = t - o->start;
    if (k < 0 || k >= static_cast<Period>(o->volumes.size())) return 0.0;
    return o->volumes[static_cast<std::size_t>(k)];
  }

  double total_volume(Period start) const {
    const BidOption* o = option_for(start);
    if (o == nullptr) return 0.0;
    double sum = 0;
    for (double v : o->volumes) sum += v;
    return sum;
  }

  bool is_supply() const {
    for (const auto& o : options)
      for (double v : o.volumes)
        if (v != 0.0) return v < 0.0;
    return false;
  }
};

struct Instance {
  int periods = 24;
  int zones = 0;
  double price_min = 0;
  double price_max = 0;
  std::vector<Line> lines;
  std::vector<double> initial_flow;  // per line: flow in the last period of the previous day
  std::vector<Segment> segments;
  std::vector<NonConvexBid> bids;

  int bid_index(const std::string& id) const {
    for (std::size_t i = 0; i < bids.size(); ++i)
      if (bids[i].id == id) return static_cast<int>(i);
    return -1;
  }

  // index of the mother bid, if any
  std::optional<int> mother_index(int b) const {
    const auto& m = bids[static_cast<std::size_t>(b)].mother;
    if (!m) return std::nullopt;
    const int i = bid_index(*m);
    if (i < 0) return std::nullopt;
    return i;
  }
};

// Shape echo used to detect cross-instance comparisons.
struct InstanceShape {
  int zones = 0;
  int periods = 0;
  int lines = 0;
  int segments = 0;
  int bids = 0;
  bool operator==(const InstanceShape&) const = default;
  static InstanceShape of(const Instance& in) {
    return {in.zones, in.periods, static_cast<int>(in.lines.size()),
            static_cast<int>(in.segments.size()), static_cast<int>(in.bids.size())};
  }
};

// Acceptance per bid, aligned with Instance::bids. nullopt = rejected,
// otherwise the chosen start period. At most one start by construction.
struct AcceptanceVector {
  std::vector<std::optional<Period>> start;

  bool accepted(int b) const { return start[static_cast<std::size_t>(b)].has_value(); }
  bool operator==(const AcceptanceVector&) const = default;

  static AcceptanceVector all_rejected(const Instance& in) {
    AcceptanceVector y;
    y.start.assign(in.bids.size(), std::nullopt);
    return y;
  }
};

struct ClearingOutcome {
  std::vector<double> fraction;             // per segment, aligned with Instance::segments
  std::vector<std::vector<double>> price;   // [zone][t]
  std::vector<std::vector<double>> flow;    // [line][t]
  std::vector<std::vector<double>> mu_upper;   // [line][t], cap congestion shadow prices
  std::vector<std::vector<double>> mu_lower;
  std::vector<std::vector<double>> rho_upper;  // ramp shadow prices
  std::vector<std::vector<double>> rho_lower;
  double surplus = 0;
};

struct FamilyCheck {
  bool pass = true;
  double worst = 0;   // largest violation magnitude seen
  std::string where;  // offending index tuple
};

// Result of checking constraint families (1)..(15).
struct AuditReport {
  std::array<FamilyCheck, 15> families{};

  FamilyCheck& family(int k) { return families.at(static_cast<std::size_t>(k - 1)); }
  const FamilyCheck& family(int k) const { return families.at(static_cast<std::size_t>(k - 1)); }

  bool all_pass() const {
    for (const auto& f : families)
      if (!f.pass) return false;
    return true;
  }

  std::string summary() const {
    std::ostringstream out;
    for (int k = 1; k <= 15; ++k) {
      const auto& f = family(k);
      out << "(" << k << ") " << (f.pass ? "pass" : "FAIL");
      if (!f.pass) out << " worst=" << f.worst << " at " << f.where;
      out << "\n";
    }
    return out.str();
  }
};

struct AuditTolerance {
  double balance = 1e-6;  // balances, complementarity products, surplus signs
  double bounds = 1e-9;   // variable bounds
};

namespace detail {

// Segment indices of one zone-period, price-ordered per stack: supply
// ascending from price_min, demand descending from price_max.
struct ZonePeriodSegments {
  std::vector<int> supply;
  std::vector<int> demand;
};

inline std::vector<ZonePeriodSegments> group_segments(const Instance& in) {
  std::vector<ZonePeriodSegments> out(
      static_cast<std::size_t>(in.zones) * static_cast<std::size_t>(in.periods));
  for (std::size_t i = 0; i < in.segments.size(); ++i) {
    const Segment& s = in.segments[i];
    auto& g = out[static_cast<std::size_t>(s.zone) * static_cast<std::size_t>(in.periods) +
                  static_cast<std::size_t>(s.period)];
    (s.kind == SegmentKind::supply ? g.supply : g.demand).push_back(static_cast<int>(i));
  }
  for (auto& g : out) {
    std::stable_sort(g.supply.begin(), g.supply.end(), [&](int a, int b) {
      return in.segments[static_cast<std::size_t>(a)].price_start <
             in.segments[static_cast<std::size_t>(b)].price_start;
    });
    std::stable_sort(g.demand.begin(), g.demand.end(), [&](int a, int b) {
      return in.segments[static_cast<std::size_t>(a)].price_start >
             in.segments[static_cast<std::size_t>(b)].price_start;
    });
  }
  return out;
}

inline std::string zp_tag(ZoneId n, Period t) {
  return "(zone=" + std::to_string(n) + ", t=" + std::to_string(t) + ")";
}

inline std::string lt_tag(const std::string& line, Period t) {
  return "(line=" + line + ", t=" + std::to_string(t) + ")";
}

}  // namespace detail

// Throws std::invalid_argument when an Instance invariant is violated.
inline void validate(const Instance& in) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("instance: " + msg); };

  if (in.periods < 1) fail("periods must be >= 1");
  if (in.zones < 1) fail("at least one zone required");
  if (!(in.price_min < in.price_max)) fail("price_min must be < price_max");

  if (in.initial_flow.size() != in.lines.size())
    fail("initial_flow must have one entry per line");
  for (std::size_t l = 0; l < in.lines.size(); ++l) {
    const Line& ln = in.lines[l];
    if (ln.source == ln.sink) fail("line " + ln.id + ": source == sink");
    if (ln.source < 0 || ln.source >= in.zones || ln.sink < 0 || ln.sink >= in.zones)
      fail("line " + ln.id + ": zone out of range");
    const auto T = static_cast<std::size_t>(in.periods);
    if (ln.upper_cap.size() != T || ln.lower_cap.size() != T || ln.ramp_limit.size() != T)
      fail("line " + ln.id + ": per-period vectors must have length " + std::to_string(in.periods));
    for (int t = 0; t < in.periods; ++t) {
      const auto u = static_cast<std::size_t>(t);
      if (ln.lower_cap[u] > ln.upper_cap[u])
        fail("line " + ln.id + ": lower_cap > upper_cap at t=" + std::to_string(t));
      if (!(ln.ramp_limit[u] >= 0)) fail("line " + ln.id + ": ramp_limit must be >= 0");
    }
    if (!std::isfinite(in.initial_flow[l])) fail("line " + ln.id + ": initial_flow must be finite");
  }

  constexpr double kPriceEps = 1e-9;
  for (const Segment& s : in.segments) {
    if (s.zone < 0 || s.zone >= in.zones) fail("segment references unknown zone");
    if (s.period < 0 || s.period >= in.periods) fail("segment references unknown period");
    if (!std::isfinite(s.volume) || !std::isfinite(s.price_start) || !std::isfinite(s.price_end))
      fail("segment fields must be finite");
    if (s.price_start < in.price_min - kPriceEps || s.price_start > in.price_max + kPriceEps ||
        s.price_end < in.price_min - kPriceEps || s.price_end > in.price_max + kPriceEps)
      fail("segment prices outside [price_min, price_max]");
    if (s.kind == SegmentKind::supply) {
      if (!(s.volume <= 0)) fail("supply segment must have volume <= 0");
      if (!(s.price_start < s.price_end)) fail("supply segment requires price_start < price_end");
    } else {
      if (!(s.volume >= 0)) fail("demand segment must have volume >= 0");
      if (!(s.price_end < s.price_start)) fail("demand segment requires price_end < price_start");
    }
  }

  // Stacks must tile the price axis contiguously: supply upward from
  // price_min, demand downward from price_max. This is what makes the price
  // formula (price_min + sum of filled supply spans) the marginal price.
  const auto groups = detail::group_segments(in);
  for (ZoneId n = 0; n < in.zones; ++n) {
    for (Period t = 0; t < in.periods; ++t) {
      const auto& g = groups[static_cast<std::size_t>(n) * static_cast<std::size_t>(in.periods) +
                             static_cast<std::size_t>(t)];
      double expect = in.price_min;
      for (int idx : g.supply) {
        const Segment& s = in.segments[static_cast<std::size_t>(idx)];
        if (std::abs(s.price_start - expect) > 1e-7)
          fail("supply stack not contiguous from price_min at " + detail::zp_tag(n, t));
        expect = s.price_end;
      }
      expect = in.price_max;
      for (int idx : g.demand) {
        const Segment& s = in.segments[static_cast<std::size_t>(idx)];
        if (std::abs(s.price_start - expect) > 1e-7)
          fail("demand stack not contiguous from price_max at " + detail::zp_tag(n, t));
        expect = s.price_end;
      }
    }
  }

  std::map<std::string, int> ids;
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    const NonConvexBid& bid = in.bids[b];
    if (bid.id.empty()) fail("bid with empty id");
    if (!ids.emplace(bid.id, static_cast<int>(b)).second) fail("duplicate bid id " + bid.id);
    if (bid.zone < 0 || bid.zone >= in.zones) fail("bid " + bid.id + ": unknown zone");
    if (bid.options.empty()) fail("bid " + bid.id + ": allowed_starts must be non-empty");
    int sign = 0;
    Period prev_start = -1;
    for (const BidOption& o : bid.options) {
      if (o.start <= prev_start) fail("bid " + bid.id + ": starts must be ascending and unique");
      prev_start = o.start;
      if (o.start < 0 || o.start + static_cast<Period>(o.volumes.size()) > in.periods)
        fail("bid " + bid.id + ": profile window outside the horizon");
      if (o.volumes.empty()) fail("bid " + bid.id + ": empty profile");
      for (double v : o.volumes) {
        if (!std::isfinite(v)) fail("bid " + bid.id + ": profile volumes must be finite");
        if (v == 0.0) continue;
        const int s = v > 0 ? 1 : -1;
        if (sign == 0) sign = s;
        if (s != sign) fail("bid " + bid.id + ": profile entries must share one sign");
      }
    }
  }
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    const NonConvexBid& bid = in.bids[b];
    if (!bid.mother) continue;
    auto it = ids.find(*bid.mother);
    if (it == ids.end()) fail("bid " + bid.id + ": mother " + *bid.mother + " does not exist");
    if (it->second == static_cast<int>(b)) fail("bid " + bid.id + ": cannot be its own mother");
    if (in.bids[static_cast<std::size_t>(it->second)].zone != bid.zone)
      fail("bid " + bid.id + ": mother must be in the same zone");
    // walk up to rule out cycles
    int cur = static_cast<int>(b);
    int steps = 0;
    while (true) {
      const auto& m = in.bids[static_cast<std::size_t>(cur)].mother;
      if (!m) break;
      cur = ids.at(*m);
      if (++steps > static_cast<int>(in.bids.size()))
        fail("bid link relation contains a cycle involving " + bid.id);
    }
  }
}

// Throws std::invalid_argument when the acceptance vector is not shaped for
// the instance (wrong size or a start outside the bid's allowed set).
inline void validate_acceptance(const Instance& in, const AcceptanceVector& y) {
  if (y.start.size() != in.bids.size())
    throw std::invalid_argument("acceptance vector does not cover the instance's bid set");
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    if (!y.start[b]) continue;
    if (in.bids[b].option_for(*y.start[b]) == nullptr)
      throw std::invalid_argument("acceptance start outside allowed_starts for bid " +
                                  in.bids[b].id);
  }
}

// Model-P objective for given fractions and acceptance. Flows do not enter.
inline double evaluate_surplus(const Instance& in, const std::vector<double>& fraction,
                               const AcceptanceVector& y) {
  if (fraction.size() != in.segments.size())
    throw std::invalid_argument("fraction vector does not cover the instance's segment set");
  validate_acceptance(in, y);
  double g = 0;
  for (std::size_t i = 0; i < in.segments.size(); ++i)
    g += segment_surplus(in.segments[i], fraction[i]);
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    if (!y.start[b]) continue;
    g += in.bids[b].price * in.bids[b].total_volume(*y.start[b]);
  }
  return g;
}

// sum_t (P_b - p_{n(b),t}) * Q_{b,start,t}
inline double bid_surplus(const Instance& in, int b, Period start,
                          const std::vector<std::vector<double>>& price) {
  const NonConvexBid& bid = in.bids.at(static_cast<std::size_t>(b));
  const BidOption* o = bid.option_for(start);
  if (o == nullptr)
    throw std::domain_error("bid " + bid.id + ": start " + std::to_string(start) +
                            " not in allowed_starts");
  const auto& p = price.at(static_cast<std::size_t>(bid.zone));
  double s = 0;
  for (std::size_t k = 0; k < o->volumes.size(); ++k)
    s += (bid.price - p.at(static_cast<std::size_t>(o->start) + k)) * o->volumes[k];
  return s;
}

namespace detail {

inline void record(FamilyCheck& f, double violation, const std::string& where) {
  if (violation > f.worst) {
    f.worst = violation;
    f.where = where;
  }
}

inline void close_family(FamilyCheck& f, double tol) { f.pass = f.worst <= tol; }

}  // namespace detail

// Checks constraint families (1)..(15) of Model-P against a candidate
// solution. Purely diagnostic: any correctly-shaped input yields a report.
inline AuditReport audit(const Instance& in, const ClearingOutcome& out,
                         const AcceptanceVector& y, const AuditTolerance& tol = {}) {
  using detail::record;
  const auto T = static_cast<std::size_t>(in.periods);
  const auto N = static_cast<std::size_t>(in.zones);
  const auto L = in.lines.size();

  auto shape_error = [](const std::string& what) {
    throw std::invalid_argument("audit: " + what);
  };
  if (out.fraction.size() != in.segments.size()) shape_error("fraction size mismatch");
  if (out.price.size() != N) shape_error("price matrix shape mismatch");
  for (const auto& row : out.price)
    if (row.size() != T) shape_error("price matrix shape mismatch");
  auto check_lt = [&](const std::vector<std::vector<double>>& m, const char* name) {
    if (m.size() != L) shape_error(std::string(name) + " shape mismatch");
    for (const auto& row : m)
      if (row.size() != T) shape_error(std::string(name) + " shape mismatch");
  };
  check_lt(out.flow, "flow");
  check_lt(out.mu_upper, "mu_upper");
  check_lt(out.mu_lower, "mu_lower");
  check_lt(out.rho_upper, "rho_upper");
  check_lt(out.rho_lower, "rho_lower");
  if (y.start.size() != in.bids.size()) shape_error("acceptance size mismatch");

  AuditReport rep;

  // (3) at most one start, structurally: the vector encodes one optional
  // start; report a violation when a chosen start is not an allowed one.
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    if (!y.start[b]) continue;
    if (in.bids[b].option_for(*y.start[b]) == nullptr)
      record(rep.family(3), 1.0, "(bid=" + in.bids[b].id + ")");
  }

  // (1) zonal balance
  {
    std::vector<std::vector<double>> net(N, std::vector<double>(T, 0.0));
    for (std::size_t i = 0; i < in.segments.size(); ++i) {
      const Segment& s = in.segments[i];
      net[static_cast<std::size_t>(s.zone)][static_cast<std::size_t>(s.period)] +=
          s.volume * out.fraction[i];
    }
    for (std::size_t b = 0; b < in.bids.size(); ++b) {
      if (!y.start[b]) continue;
      const NonConvexBid& bid = in.bids[b];
      const BidOption* o = bid.option_for(*y.start[b]);
      if (o == nullptr) continue;
      for (std::size_t k = 0; k < o->volumes.size(); ++k)
        net[static_cast<std::size_t>(bid.zone)][static_cast<std::size_t>(o->start) + k] +=
            o->volumes[k];
    }
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t t = 0; t < T; ++t) {
        net[static_cast<std::size_t>(in.lines[l].source)][t] += out.flow[l][t];
        net[static_cast<std::size_t>(in.lines[l].sink)][t] -= out.flow[l][t];
      }
    }
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < T; ++t)
        record(rep.family(1), std::abs(net[n][t]),
               detail::zp_tag(static_cast<ZoneId>(n), static_cast<Period>(t)));
  }

  // (2) x <= 1
  for (std::size_t i = 0; i < in.segments.size(); ++i)
    record(rep.family(2), out.fraction[i] - 1.0, "(segment=" + std::to_string(i) + ")");

  // (4) link relation
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    const auto m = in.mother_index(static_cast<int>(b));
    if (!m) continue;
    const bool self = y.start[b].has_value();
    const bool mom = y.start[static_cast<std::size_t>(*m)].has_value();
    if (self && !mom) record(rep.family(4), 1.0, "(bid=" + in.bids[b].id + ")");
  }

  // (5) ramping
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t t = 0; t < T; ++t) {
      const double prev = t == 0 ? in.initial_flow[l] : out.flow[l][t - 1];
      const double delta = std::abs(out.flow[l][t] - prev);
      const double limit = in.lines[l].ramp_limit[t];
      if (std::isfinite(limit))
        record(rep.family(5), delta - limit,
               detail::lt_tag(in.lines[l].id, static_cast<Period>(t)));
    }
  }

  // (6)/(7) price-matching compatibility
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    const NonConvexBid& bid = in.bids[b];
    const auto m = in.mother_index(static_cast<int>(b));
    const double self = y.start[b] ? 1.0 : 0.0;
    for (const BidOption& o : bid.options) {
      const double surplus = bid_surplus(in, static_cast<int>(b), o.start, out.price);
      if (!m && !bid.mother) {
        record(rep.family(6), (1.0 - self) * surplus,
               "(bid=" + bid.id + ", start=" + std::to_string(o.start) + ")");
      } else if (m) {
        const double mom = y.start[static_cast<std::size_t>(*m)] ? 1.0 : 0.0;
        record(rep.family(7), (mom - self) * surplus,
               "(bid=" + bid.id + ", start=" + std::to_string(o.start) + ")");
      }
    }
  }

  // (8)-(11) congestion/ramp complementarity
  auto comp = [&](int fam, std::size_t l, std::size_t t, double slack, double dual) {
    double v;
    if (std::isfinite(slack))
      v = std::abs(slack * dual);
    else
      v = std::abs(dual);  // positive dual on an unbounded constraint
    record(rep.family(fam), v, detail::lt_tag(in.lines[l].id, static_cast<Period>(t)));
  };
  for (std::size_t l = 0; l < L; ++l) {
    const Line& ln = in.lines[l];
    for (std::size_t t = 0; t < T; ++t) {
      const double f = out.flow[l][t];
      const double prev = t == 0 ? in.initial_flow[l] : out.flow[l][t - 1];
      comp(8, l, t, ln.upper_cap[t] - f, out.mu_upper[l][t]);
      comp(9, l, t, f - ln.lower_cap[t], out.mu_lower[l][t]);
      comp(10, l, t, ln.ramp_limit[t] - (f - prev), out.rho_upper[l][t]);
      comp(11, l, t, ln.ramp_limit[t] + (f - prev), out.rho_lower[l][t]);
    }
  }

  // (12) stationarity linking shadow prices to zonal price differences
  for (std::size_t l = 0; l < L; ++l) {
    const Line& ln = in.lines[l];
    for (std::size_t t = 0; t < T; ++t) {
      double lhs = out.mu_upper[l][t] - out.mu_lower[l][t] + out.rho_upper[l][t] -
                   out.rho_lower[l][t];
      if (t + 1 < T) lhs += -out.rho_upper[l][t + 1] + out.rho_lower[l][t + 1];
      const double rhs = out.price[static_cast<std::size_t>(ln.sink)][t] -
                         out.price[static_cast<std::size_t>(ln.source)][t];
      record(rep.family(12), std::abs(lhs - rhs),
             detail::lt_tag(ln.id, static_cast<Period>(t)));
    }
  }

  // (13) fill order within each stack
  {
    const auto groups = detail::group_segments(in);
    auto fill_order = [&](const std::vector<int>& stack, ZoneId n, Period t) {
      for (std::size_t k = 1; k < stack.size(); ++k) {
        const double xi = out.fraction[static_cast<std::size_t>(stack[k])];
        const double xprev = out.fraction[static_cast<std::size_t>(stack[k - 1])];
        record(rep.family(13), std::abs(xi * (1.0 - xprev)),
               detail::zp_tag(n, t) + " segment#" + std::to_string(stack[k]));
      }
    };
    for (ZoneId n = 0; n < in.zones; ++n) {
      for (Period t = 0; t < in.periods; ++t) {
        const auto& g = groups[static_cast<std::size_t>(n) * T + static_cast<std::size_t>(t)];
        fill_order(g.supply, n, t);
        fill_order(g.demand, n, t);
      }
    }
  }

  // (14) price formula from supply fractions
  {
    std::vector<std::vector<double>> formula(N, std::vector<double>(T, in.price_min));
    for (std::size_t i = 0; i < in.segments.size(); ++i) {
      const Segment& s = in.segments[i];
      if (s.kind != SegmentKind::supply) continue;
      formula[static_cast<std::size_t>(s.zone)][static_cast<std::size_t>(s.period)] +=
          s.span() * out.fraction[i];
    }
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < T; ++t)
        record(rep.family(14), std::abs(out.price[n][t] - formula[n][t]),
               detail::zp_tag(static_cast<ZoneId>(n), static_cast<Period>(t)));
  }

  // (15) variable bounds
  {
    for (std::size_t i = 0; i < in.segments.size(); ++i)
      record(rep.family(15), -out.fraction[i], "(segment=" + std::to_string(i) + " x<0)");
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t t = 0; t < T; ++t) {
        record(rep.family(15), in.price_min - out.price[n][t],
               detail::zp_tag(static_cast<ZoneId>(n), static_cast<Period>(t)) + " p<min");
        record(rep.family(15), out.price[n][t] - in.price_max,
               detail::zp_tag(static_cast<ZoneId>(n), static_cast<Period>(t)) + " p>max");
      }
    }
    for (std::size_t l = 0; l < L; ++l) {
      const Line& ln = in.lines[l];
      for (std::size_t t = 0; t < T; ++t) {
        const std::string tag = detail::lt_tag(ln.id, static_cast<Period>(t));
        record(rep.family(15), out.flow[l][t] - ln.upper_cap[t], tag + " f>cap");
        record(rep.family(15), ln.lower_cap[t] - out.flow[l][t], tag + " f<cap");
        record(rep.family(15), -out.mu_upper[l][t], tag + " mu_upper<0");
        record(rep.family(15), -out.mu_lower[l][t], tag + " mu_lower<0");
        record(rep.family(15), -out.rho_upper[l][t], tag + " rho_upper<0");
        record(rep.family(15), -out.rho_lower[l][t], tag + " rho_lower<0");
      }
    }
  }

  const double bal = tol.balance;
  const double bnd = tol.bounds;
  detail::close_family(rep.family(1), bal);
  detail::close_family(rep.family(2), bnd);
  detail::close_family(rep.family(3), 0.0);
  detail::close_family(rep.family(4), 0.0);
  detail::close_family(rep.family(5), bal);
  detail::close_family(rep.family(6), bal);
  detail::close_family(rep.family(7), bal);
  detail::close_family(rep.family(8), bal);
  detail::close_family(rep.family(9), bal);
  detail::close_family(rep.family(10), bal);
  detail::close_family(rep.family(11), bal);
  detail::close_family(rep.family(12), bal);
  detail::close_family(rep.family(13), bal);
  detail::close_family(rep.family(14), bal);
  detail::close_family(rep.family(15), bnd);
  return rep;
}

}  // namespace zonalclear
