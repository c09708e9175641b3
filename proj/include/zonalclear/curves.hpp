#pragma once

// Aggregation of hourly segments into per-zone-period net curves and the
// analytic single-zone-period clearing used as the inner solve everywhere:
// tabu candidate evaluation, the price-flow gradient loop, and the oracle.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "zonalclear/model.hpp"

namespace zonalclear {

// One stack entry. lo < hi is the price interval the piece covers; volume is
// the unsigned magnitude. Supply pieces fill lo -> hi as price rises, demand
// pieces fill hi -> lo as price falls.
struct CurvePiece {
  int segment = -1;  // index into Instance::segments
  double lo = 0;
  double hi = 0;
  double volume = 0;  // |Q|
};

struct NetCurve {
  ZoneId zone = 0;
  Period period = 0;
  double price_min = 0;
  double price_max = 0;
  std::vector<CurvePiece> supply;  // ascending price
  std::vector<CurvePiece> demand;  // descending price
  std::vector<double> supply_cum;  // signed cumulative volume (<= 0)
  std::vector<double> demand_cum;  // cumulative volume (>= 0)
  double supply_total = 0;         // magnitude
  double demand_total = 0;
  double supply_cover_top = 0;  // price up to which the supply stack tiles

  // accepted supply magnitude when both stacks are filled to price p
  double supply_at(double p) const {
    double s = 0;
    for (const CurvePiece& c : supply) {
      if (p >= c.hi)
        s += c.volume;
      else if (p > c.lo)
        s += c.volume * (p - c.lo) / (c.hi - c.lo);
      else
        break;
    }
    return s;
  }

  double demand_at(double p) const {
    double d = 0;
    for (const CurvePiece& c : demand) {
      if (p <= c.lo)
        d += c.volume;
      else if (p < c.hi)
        d += c.volume * (c.hi - p) / (c.hi - c.lo);
      else
        break;
    }
    return d;
  }
};

struct CurveSet {
  int zones = 0;
  int periods = 0;
  std::vector<NetCurve> curves;  // index = zone * periods + t

  const NetCurve& at(ZoneId n, Period t) const {
    return curves[static_cast<std::size_t>(n) * static_cast<std::size_t>(periods) +
                  static_cast<std::size_t>(t)];
  }
};

inline CurveSet build_curves(const Instance& in) {
  CurveSet set;
  set.zones = in.zones;
  set.periods = in.periods;
  set.curves.resize(static_cast<std::size_t>(in.zones) * static_cast<std::size_t>(in.periods));
  const auto groups = detail::group_segments(in);
  for (ZoneId n = 0; n < in.zones; ++n) {
    for (Period t = 0; t < in.periods; ++t) {
      const std::size_t idx =
          static_cast<std::size_t>(n) * static_cast<std::size_t>(in.periods) +
          static_cast<std::size_t>(t);
      NetCurve& c = set.curves[idx];
      c.zone = n;
      c.period = t;
      c.price_min = in.price_min;
      c.price_max = in.price_max;
      c.supply_cover_top = in.price_min;
      for (int i : groups[idx].supply) {
        const Segment& s = in.segments[static_cast<std::size_t>(i)];
        c.supply.push_back({i, s.price_start, s.price_end, -s.volume});
        c.supply_total += -s.volume;
        c.supply_cum.push_back(c.supply_cum.empty() ? s.volume : c.supply_cum.back() + s.volume);
        c.supply_cover_top = s.price_end;
      }
      for (int i : groups[idx].demand) {
        const Segment& s = in.segments[static_cast<std::size_t>(i)];
        c.demand.push_back({i, s.price_end, s.price_start, s.volume});
        c.demand_total += s.volume;
        c.demand_cum.push_back(c.demand_cum.empty() ? s.volume : c.demand_cum.back() + s.volume);
      }
    }
  }
  return set;
}

// Full clearing of one zone-period at a fixed injection. Infeasibility is a
// value, not an error: neighbor evaluation in the search needs it cheap.
struct ZonePeriodClearing {
  bool feasible = false;
  double price = 0;
  double traded_volume = 0;
  // (segment index, accepted fraction), supply stack order then demand
  std::vector<std::pair<int, double>> fractions;
};

// Value-only fast path for search loops.
struct ClearingValue {
  bool feasible = false;
  double price = 0;
  double surplus = 0;  // hourly-segment part of the objective slice
  double traded_volume = 0;
};

namespace detail {

// Balance residual h(p) = demand_at(p) - supply_at(p) + injection. The
// clearing price is a root of h; h is continuous, piecewise linear and
// non-increasing in p.
struct ClearingCore {
  bool feasible = false;
  bool rationed = false;  // supply stack exhausted below the crossing
  double price = 0;
  double demand_target = 0;  // accepted demand volume on the rationed path
};

inline ClearingCore clear_core(const NetCurve& c, double injection) {
  ClearingCore r;
  const double scale = 1.0 + std::abs(injection) + c.supply_total + c.demand_total;
  const double eps = 1e-9 * scale;

  const double h_min = c.demand_total + injection;  // h(price_min)
  if (h_min < -eps) return r;                       // withdrawal exceeds total demand

  const double top = std::min(c.supply_cover_top, c.price_max);
  const double h_top = c.demand_at(top) - c.supply_total + injection;
  if (h_top > eps) {
    // Supply exhausted before balancing (covers the demand-only stack, which
    // clears at price_min by literal application of the price formula).
    const double target = c.supply_total - injection;
    if (target < -eps) return r;  // export exceeds total supply
    r.feasible = true;
    r.rationed = true;
    r.price = top;
    r.demand_target = std::min(std::max(target, 0.0), c.demand_total);
    return r;
  }

  // Root of h within [price_min, top]: walk breakpoints of both stacks.
  std::vector<double> bp;
  bp.reserve(2 * (c.supply.size() + c.demand.size()) + 2);
  bp.push_back(c.price_min);
  for (const CurvePiece& p : c.supply) {
    if (p.lo < top) bp.push_back(p.lo);
    if (p.hi < top) bp.push_back(p.hi);
  }
  for (const CurvePiece& p : c.demand) {
    if (p.lo > c.price_min && p.lo < top) bp.push_back(p.lo);
    if (p.hi > c.price_min && p.hi < top) bp.push_back(p.hi);
  }
  bp.push_back(top);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  auto h = [&](double p) { return c.demand_at(p) - c.supply_at(p) + injection; };

  double prev_p = bp.front();
  double prev_h = h_min;
  for (std::size_t k = 1; k < bp.size(); ++k) {
    const double cur_p = bp[k];
    const double cur_h = (k + 1 == bp.size()) ? h_top : h(cur_p);
    if (cur_h <= eps) {
      double p_lo;
      if (prev_h - cur_h > eps) {
        p_lo = prev_p + (cur_p - prev_p) * prev_h / (prev_h - cur_h);
      } else {
        p_lo = prev_p;  // flat at zero entering this interval
      }
      // Extend through any flat-zero stretch and take the midpoint; the
      // traded volume is identical anywhere inside it.
      double p_hi = std::max(p_lo, std::min(cur_p, top));
      std::size_t j = k;
      double hj = cur_h;
      while (std::abs(hj) <= eps && j + 1 < bp.size()) {
        ++j;
        const double next_h = (j + 1 == bp.size()) ? h_top : h(bp[j]);
        if (next_h >= -eps) {
          p_hi = bp[j];
          hj = next_h;
        } else {
          // root inside (bp[j-1], bp[j])
          const double a = bp[j - 1], b = bp[j];
          if (hj - next_h > eps) p_hi = a + (b - a) * hj / (hj - next_h);
          break;
        }
      }
      r.feasible = true;
      r.price = std::clamp(0.5 * (p_lo + p_hi), c.price_min, top);
      return r;
    }
    prev_p = cur_p;
    prev_h = cur_h;
  }
  // h stayed positive up to `top`; only reachable through fp corner cases.
  r.feasible = true;
  r.rationed = true;
  r.price = top;
  r.demand_target = std::min(std::max(c.supply_total - injection, 0.0), c.demand_total);
  return r;
}

inline double fill_fraction_supply(const CurvePiece& p, double price) {
  if (price >= p.hi) return 1.0;
  if (price <= p.lo) return 0.0;
  return (price - p.lo) / (p.hi - p.lo);
}

inline double fill_fraction_demand(const CurvePiece& p, double price) {
  if (price <= p.lo) return 1.0;
  if (price >= p.hi) return 0.0;
  return (p.hi - price) / (p.hi - p.lo);
}

}  // namespace detail

inline ZonePeriodClearing clear_zone_period(const NetCurve& c, double fixed_injection) {
  ZonePeriodClearing out;
  const auto core = detail::clear_core(c, fixed_injection);
  if (!core.feasible) return out;
  out.feasible = true;
  out.price = core.price;
  out.fractions.reserve(c.supply.size() + c.demand.size());

  double supply_acc = 0;
  for (const CurvePiece& p : c.supply) {
    const double x = core.rationed ? 1.0 : detail::fill_fraction_supply(p, core.price);
    supply_acc += x * p.volume;
    out.fractions.emplace_back(p.segment, x);
  }

  double demand_acc = 0;
  if (core.rationed) {
    double remaining = core.demand_target;
    for (const CurvePiece& p : c.demand) {
      const double take = std::min(p.volume, std::max(remaining, 0.0));
      const double x = p.volume > 0 ? take / p.volume : (remaining > 0 ? 1.0 : 0.0);
      remaining -= take;
      demand_acc += take;
      out.fractions.emplace_back(p.segment, x);
    }
  } else {
    int marginal = -1;
    for (const CurvePiece& p : c.demand) {
      const double x = detail::fill_fraction_demand(p, core.price);
      if (x > 0.0 && x < 1.0 && p.volume > 0)
        marginal = static_cast<int>(out.fractions.size());
      demand_acc += x * p.volume;
      out.fractions.emplace_back(p.segment, x);
    }
    // Absorb interpolation rounding into a marginal demand piece so the
    // balance holds to machine precision.
    const double residual = demand_acc - supply_acc + fixed_injection;
    if (marginal >= 0 && residual != 0.0) {
      auto& fr = out.fractions[static_cast<std::size_t>(marginal)];
      const double vol =
          c.demand[static_cast<std::size_t>(marginal) - c.supply.size()].volume;
      const double adjusted = std::clamp(fr.second - residual / vol, 0.0, 1.0);
      demand_acc += (adjusted - fr.second) * vol;
      fr.second = adjusted;
    }
  }
  out.traded_volume = std::max(supply_acc, demand_acc);
  return out;
}

// Same walk, but only price/surplus/volume; no per-segment output.
inline ClearingValue clear_zone_period_value(const NetCurve& c, double fixed_injection) {
  ClearingValue out;
  const auto core = detail::clear_core(c, fixed_injection);
  if (!core.feasible) return out;
  out.feasible = true;
  out.price = core.price;

  double surplus = 0;
  double supply_acc = 0;
  for (const CurvePiece& p : c.supply) {
    const double x = core.rationed ? 1.0 : detail::fill_fraction_supply(p, core.price);
    supply_acc += x * p.volume;
    // supply: Q = -volume, P0 = lo, P1 = hi
    surplus += -p.volume * (p.lo * x + (p.hi - p.lo) * x * x * 0.5);
  }
  double demand_acc = 0;
  if (core.rationed) {
    double remaining = core.demand_target;
    for (const CurvePiece& p : c.demand) {
      const double take = std::min(p.volume, std::max(remaining, 0.0));
      const double x = p.volume > 0 ? take / p.volume : 0.0;
      remaining -= take;
      demand_acc += take;
      surplus += p.volume * (p.hi * x + (p.lo - p.hi) * x * x * 0.5);
    }
  } else {
    for (const CurvePiece& p : c.demand) {
      const double x = detail::fill_fraction_demand(p, core.price);
      demand_acc += x * p.volume;
      // demand: Q = +volume, P0 = hi, P1 = lo
      surplus += p.volume * (p.hi * x + (p.lo - p.hi) * x * x * 0.5);
    }
  }
  out.surplus = surplus;
  out.traded_volume = std::max(supply_acc, demand_acc);
  return out;
}

// Hourly-segment slice of the objective for a feasible clearing.
inline double surplus_of_clearing(const NetCurve& c, const ZonePeriodClearing& cl) {
  if (!cl.feasible) throw std::domain_error("surplus_of_clearing: infeasible clearing");
  if (cl.fractions.size() != c.supply.size() + c.demand.size())
    throw std::invalid_argument("surplus_of_clearing: clearing does not match curve");
  double g = 0;
  for (std::size_t k = 0; k < c.supply.size(); ++k) {
    const CurvePiece& p = c.supply[k];
    const double x = cl.fractions[k].second;
    g += -p.volume * (p.lo * x + (p.hi - p.lo) * x * x * 0.5);
  }
  for (std::size_t k = 0; k < c.demand.size(); ++k) {
    const CurvePiece& p = c.demand[k];
    const double x = cl.fractions[c.supply.size() + k].second;
    g += p.volume * (p.hi * x + (p.lo - p.hi) * x * x * 0.5);
  }
  return g;
}

// dp/dI at the current clearing price: reciprocal of the total marginal
// slope of both stacks. Used by the price-flow polish step.
inline double price_sensitivity(const NetCurve& c, double price) {
  double slope = 0;  // d(S - D)/dp >= 0
  for (const CurvePiece& p : c.supply)
    if (price > p.lo && price < p.hi) slope += p.volume / (p.hi - p.lo);
  for (const CurvePiece& p : c.demand)
    if (price > p.lo && price < p.hi) slope += p.volume / (p.hi - p.lo);
  if (slope <= 0) return 0.0;
  return 1.0 / slope;
}

}  // namespace zonalclear
