#pragma once

// Per-zone tabu search over non-convex bid acceptance with adaptive radius,
// given fixed line flows. Runs a dual-region search (link-feasible region vs.
// price-matching-compatible region), each with its own FIFO tabu list, plus
// a global list of visited surplus values.

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "zonalclear/common.hpp"
#include "zonalclear/curves.hpp"
#include "zonalclear/model.hpp"
#include "zonalclear/rng.hpp"

namespace zonalclear {

// Single-bid modification: new start period, or rejection (nullopt).
struct TabuMove {
  int bid = -1;  // index local to the zone
  std::optional<Period> to;
  bool operator==(const TabuMove&) const = default;
};

class LocalTabuList {
 public:
  explicit LocalTabuList(std::size_t tenure) : tenure_(tenure) {}

  bool contains(const TabuMove& m) const {
    return std::find(fifo_.begin(), fifo_.end(), m) != fifo_.end();
  }
  void push(const TabuMove& m) {
    fifo_.push_back(m);
    while (fifo_.size() > tenure_) fifo_.pop_front();
  }
  std::size_t size() const { return fifo_.size(); }

 private:
  std::size_t tenure_;
  std::deque<TabuMove> fifo_;
};

// Surplus values seen so far; tabu until the search stops.
class GlobalTabuList {
 public:
  explicit GlobalTabuList(double tol = 1e-6) : tol_(tol) {}

  bool contains(double surplus) const {
    auto it = std::lower_bound(seen_.begin(), seen_.end(), surplus - tol_);
    return it != seen_.end() && *it <= surplus + tol_;
  }
  void insert(double surplus) {
    auto it = std::lower_bound(seen_.begin(), seen_.end(), surplus);
    seen_.insert(it, surplus);
  }
  std::size_t size() const { return seen_.size(); }

 private:
  double tol_;
  std::vector<double> seen_;
};

struct TsConfig {
  int tenure = 7;
  int radius_min = 5;
  int radius_max = 0;        // 0 -> min(2 * #bids, 50)
  int radius_shrink = 0;     // k; 0 -> ceil(radius_max / 10)
  int cond1_iterations = 200;
  int max_jumps = 4;
  double surplus_tol = 1e-6;  // global-list equality tolerance
};

inline int resolve_radius_max(const TsConfig& cfg, int bid_count) {
  if (cfg.radius_max > 0) return cfg.radius_max;
  return std::max(1, std::min(2 * bid_count, 50));
}

inline int resolve_radius_shrink(const TsConfig& cfg, int radius_max) {
  if (cfg.radius_shrink > 0) return cfg.radius_shrink;
  return (radius_max + 9) / 10;
}

// radius = max(radius_min, radius_max - k * streak); resets on improvement.
inline int adaptive_radius(int radius_max, int radius_min, int shrink,
                           int non_improving_streak) {
  return std::max(radius_min, radius_max - shrink * non_improving_streak);
}

// One zone's slice of the problem under fixed flows.
struct ZoneView {
  const Instance* instance = nullptr;
  ZoneId zone = 0;
  std::vector<const NetCurve*> curves;   // per period
  std::vector<int> bids;                 // global bid indices of this zone
  std::vector<int> mother;               // local index of the mother, -1 if none
  std::vector<std::vector<int>> children;  // local indices
  std::vector<double> base_injection;    // per period: flow part of constraint (1)
};

inline std::vector<ZoneView> make_zone_views(const Instance& in, const CurveSet& curves,
                                             const std::vector<std::vector<double>>& flows) {
  std::vector<ZoneView> views(static_cast<std::size_t>(in.zones));
  for (ZoneId n = 0; n < in.zones; ++n) {
    ZoneView& v = views[static_cast<std::size_t>(n)];
    v.instance = &in;
    v.zone = n;
    v.curves.resize(static_cast<std::size_t>(in.periods));
    for (Period t = 0; t < in.periods; ++t)
      v.curves[static_cast<std::size_t>(t)] = &curves.at(n, t);
    v.base_injection.assign(static_cast<std::size_t>(in.periods), 0.0);
  }
  for (std::size_t l = 0; l < in.lines.size(); ++l) {
    const Line& ln = in.lines[l];
    for (int t = 0; t < in.periods; ++t) {
      const auto u = static_cast<std::size_t>(t);
      views[static_cast<std::size_t>(ln.source)].base_injection[u] += flows[l][u];
      views[static_cast<std::size_t>(ln.sink)].base_injection[u] -= flows[l][u];
    }
  }
  std::vector<int> local_of(in.bids.size(), -1);
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    ZoneView& v = views[static_cast<std::size_t>(in.bids[b].zone)];
    local_of[b] = static_cast<int>(v.bids.size());
    v.bids.push_back(static_cast<int>(b));
  }
  for (auto& v : views) {
    v.mother.assign(v.bids.size(), -1);
    v.children.assign(v.bids.size(), {});
  }
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    const auto m = in.mother_index(static_cast<int>(b));
    if (!m) continue;
    ZoneView& v = views[static_cast<std::size_t>(in.bids[b].zone)];
    const int child_local = local_of[b];
    const int mother_local = local_of[static_cast<std::size_t>(*m)];
    v.mother[static_cast<std::size_t>(child_local)] = mother_local;
    v.children[static_cast<std::size_t>(mother_local)].push_back(child_local);
  }
  return views;
}

// Acceptance restricted to one zone, aligned with ZoneView::bids.
using ZoneState = std::vector<std::optional<Period>>;

struct ZoneEval {
  bool clearable = false;
  double surplus = kNegInf;
  std::vector<double> price;  // per period, valid when clearable
};

inline ZoneEval evaluate_zone(const ZoneView& v, const ZoneState& s) {
  const Instance& in = *v.instance;
  const auto T = static_cast<std::size_t>(in.periods);
  ZoneEval e;
  e.price.assign(T, in.price_min);
  std::vector<double> inj = v.base_injection;
  double bid_term = 0;
  for (std::size_t i = 0; i < v.bids.size(); ++i) {
    if (!s[i]) continue;
    const NonConvexBid& bid = in.bids[static_cast<std::size_t>(v.bids[i])];
    const BidOption* o = bid.option_for(*s[i]);
    if (o == nullptr) return e;
    for (std::size_t k = 0; k < o->volumes.size(); ++k)
      inj[static_cast<std::size_t>(o->start) + k] += o->volumes[k];
    bid_term += bid.price * bid.total_volume(*s[i]);
  }
  double g = bid_term;
  for (std::size_t t = 0; t < T; ++t) {
    const auto val = clear_zone_period_value(*v.curves[t], inj[t]);
    if (!val.feasible) return e;
    g += val.surplus;
    e.price[t] = val.price;
  }
  e.clearable = true;
  e.surplus = g;
  return e;
}

// sum_t (P_b - p_t) Q_{b,start,t} for a zone-local bid at zone prices
inline double zone_bid_surplus(const ZoneView& v, int local_bid, Period start,
                               const std::vector<double>& price) {
  const NonConvexBid& bid =
      v.instance->bids[static_cast<std::size_t>(v.bids[static_cast<std::size_t>(local_bid)])];
  const BidOption* o = bid.option_for(start);
  if (o == nullptr) throw std::domain_error("zone_bid_surplus: start not allowed");
  double s = 0;
  for (std::size_t k = 0; k < o->volumes.size(); ++k)
    s += (bid.price - price[static_cast<std::size_t>(o->start) + k]) * o->volumes[k];
  return s;
}

// All non-convex bids accepted at a uniformly random allowed start.
inline ZoneState initial_solution(const ZoneView& v, Rng& rng) {
  ZoneState s(v.bids.size());
  for (std::size_t i = 0; i < v.bids.size(); ++i) {
    const auto& opts = v.instance->bids[static_cast<std::size_t>(v.bids[i])].options;
    s[i] = opts[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(opts.size()) - 1))]
               .start;
  }
  return s;
}

namespace detail {

inline void cascade_reject(const ZoneView& v, ZoneState& s, int local_bid) {
  s[static_cast<std::size_t>(local_bid)] = std::nullopt;
  for (int child : v.children[static_cast<std::size_t>(local_bid)])
    if (s[static_cast<std::size_t>(child)]) cascade_reject(v, s, child);
}

inline void cascade_accept(const ZoneView& v, ZoneState& s, int local_bid, Period start,
                           Rng& rng) {
  s[static_cast<std::size_t>(local_bid)] = start;
  int m = v.mother[static_cast<std::size_t>(local_bid)];
  int cur = local_bid;
  while (m >= 0 && !s[static_cast<std::size_t>(m)]) {
    const auto& opts = v.instance->bids[static_cast<std::size_t>(v.bids[static_cast<std::size_t>(m)])].options;
    s[static_cast<std::size_t>(m)] =
        opts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(opts.size()) - 1))]
            .start;
    cur = m;
    m = v.mother[static_cast<std::size_t>(cur)];
  }
}

inline Period random_start(const NonConvexBid& bid, Rng& rng) {
  return bid.options[static_cast<std::size_t>(
                         rng.uniform_int(0, static_cast<std::int64_t>(bid.options.size()) - 1))]
      .start;
}

}  // namespace detail

struct Candidate {
  TabuMove move;
  ZoneState state;
};

// Candidate moves around `s`: reject an accepted bid with positive surplus,
// accept a rejected bid with negative surplus at a random start, or move the
// start of an accepted bid. Every candidate is cascaded so the link relation
// holds. Falls back to unrestricted random single-bid moves when the rule
// yields nothing, so the search never stalls.
inline std::vector<Candidate> neighborhood(const ZoneView& v, const ZoneState& s,
                                           const ZoneEval& eval, int radius, Rng& rng) {
  const Instance& in = *v.instance;
  std::vector<Candidate> out;
  if (v.bids.empty() || radius <= 0) return out;

  std::vector<TabuMove> pool;
  if (eval.clearable) {
    for (std::size_t i = 0; i < v.bids.size(); ++i) {
      const NonConvexBid& bid = in.bids[static_cast<std::size_t>(v.bids[i])];
      if (s[i]) {
        if (zone_bid_surplus(v, static_cast<int>(i), *s[i], eval.price) > 0)
          pool.push_back({static_cast<int>(i), std::nullopt});
        if (bid.options.size() > 1) {
          Period alt = detail::random_start(bid, rng);
          if (alt == *s[i]) alt = detail::random_start(bid, rng);
          if (alt != *s[i]) pool.push_back({static_cast<int>(i), alt});
        }
      } else {
        const Period t0 = detail::random_start(bid, rng);
        if (zone_bid_surplus(v, static_cast<int>(i), t0, eval.price) < 0)
          pool.push_back({static_cast<int>(i), t0});
      }
    }
  }
  if (pool.empty()) {
    // unrestricted random fallback
    for (int k = 0; k < radius; ++k) {
      const auto i = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(v.bids.size()) - 1));
      const NonConvexBid& bid = in.bids[static_cast<std::size_t>(v.bids[i])];
      if (s[i]) {
        if (bid.options.size() > 1 && rng.bernoulli(0.5)) {
          const Period alt = detail::random_start(bid, rng);
          if (alt != *s[i]) pool.push_back({static_cast<int>(i), alt});
        } else {
          pool.push_back({static_cast<int>(i), std::nullopt});
        }
      } else {
        pool.push_back({static_cast<int>(i), detail::random_start(bid, rng)});
      }
    }
  }

  rng.shuffle(pool);
  for (const TabuMove& m : pool) {
    if (static_cast<int>(out.size()) >= radius) break;
    if (m.to == s[static_cast<std::size_t>(m.bid)]) continue;  // no-op
    bool dup = false;
    for (const Candidate& c : out)
      if (c.move == m) dup = true;
    if (dup) continue;
    Candidate cand{m, s};
    if (m.to)
      detail::cascade_accept(v, cand.state, m.bid, *m.to, rng);
    else
      detail::cascade_reject(v, cand.state, m.bid);
    out.push_back(std::move(cand));
  }
  return out;
}

struct RepairResult {
  ZoneState state;
  bool repaired = false;  // false -> irreparable, state echoes the input
};

// Accept-only repair of price-matching violations: while some rejected bid
// (motherless, or with an accepted mother) has positive surplus at one of
// its starts, accept one of the violated bids. Each step grows the accepted
// set, so the procedure terminates.
inline RepairResult repair_compatibility(const ZoneView& v, const ZoneState& start_state,
                                         Rng& rng, double tol = 1e-6) {
  const Instance& in = *v.instance;
  ZoneState s = start_state;
  ZoneEval eval = evaluate_zone(v, s);
  if (!eval.clearable) return {start_state, false};

  for (std::size_t round = 0; round <= v.bids.size(); ++round) {
    struct Violation {
      int bid;
      Period best_start;
    };
    std::vector<Violation> violated;
    for (std::size_t i = 0; i < v.bids.size(); ++i) {
      if (s[i]) continue;
      const int m = v.mother[i];
      if (m >= 0 && !s[static_cast<std::size_t>(m)]) continue;  // factor 0 in (7)
      const NonConvexBid& bid = in.bids[static_cast<std::size_t>(v.bids[i])];
      double best = 0;
      Period best_start = bid.options.front().start;
      for (const BidOption& o : bid.options) {
        const double su = zone_bid_surplus(v, static_cast<int>(i), o.start, eval.price);
        if (su > best) {
          best = su;
          best_start = o.start;
        }
      }
      if (best > tol) violated.push_back({static_cast<int>(i), best_start});
    }
    if (violated.empty()) return {s, true};

    rng.shuffle(violated);
    bool advanced = false;
    for (const Violation& viol : violated) {
      ZoneState next = s;
      next[static_cast<std::size_t>(viol.bid)] = viol.best_start;
      ZoneEval next_eval = evaluate_zone(v, next);
      if (next_eval.clearable) {
        s = std::move(next);
        eval = std::move(next_eval);
        advanced = true;
        break;
      }
    }
    if (!advanced) return {start_state, false};
  }
  return {start_state, false};
}

struct ZoneSearchResult {
  bool feasible = false;  // a clearable, compatible state was found
  ZoneState state;
  double surplus = kNegInf;
  int iterations = 0;
};

// Table-style zonal TS: dual-region search with per-region tabu lists, a
// global surplus list, adaptive radius, and up to max_jumps restarts from
// the best solution found.
inline ZoneSearchResult search_zone(const ZoneView& v, const TsConfig& cfg, Rng& rng,
                                    const Deadline& deadline = {}) {
  ZoneSearchResult res;
  res.state.assign(v.bids.size(), std::nullopt);

  if (v.bids.empty()) {
    const ZoneEval e = evaluate_zone(v, res.state);
    res.feasible = e.clearable;
    res.surplus = e.surplus;
    return res;
  }

  const int radius_max = resolve_radius_max(cfg, static_cast<int>(v.bids.size()));
  const int radius_min = std::max(cfg.radius_min, 1);
  const int shrink = resolve_radius_shrink(cfg, radius_max);

  ZoneState current = initial_solution(v, rng);
  ZoneEval cur_eval = evaluate_zone(v, current);
  double cur_g = cur_eval.surplus;

  GlobalTabuList global(cfg.surplus_tol);
  LocalTabuList relaxed_tl(static_cast<std::size_t>(cfg.tenure));
  LocalTabuList compat_tl(static_cast<std::size_t>(cfg.tenure));

  bool have_best = false;
  ZoneState best_state;
  double best_g = kNegInf;
  auto offer_best = [&](const ZoneState& s, double g) {
    if (!have_best || g > best_g) {
      have_best = true;
      best_state = s;
      best_g = g;
    }
  };

  // seed the compatible incumbent from the repaired initial solution
  {
    const RepairResult r = repair_compatibility(v, current, rng, cfg.surplus_tol);
    if (r.repaired) {
      const ZoneEval e = evaluate_zone(v, r.state);
      if (e.clearable) offer_best(r.state, e.surplus);
    }
  }

  double best_raw = cur_g;
  int streak = 0;

  for (int jump = 0; jump < cfg.max_jumps; ++jump) {
    const double best_before_round = best_g;
    for (int it = 0; it < cfg.cond1_iterations; ++it) {
      ++res.iterations;
      if (deadline.expired()) break;

      const int radius = adaptive_radius(radius_max, radius_min, shrink, streak);
      auto cands = neighborhood(v, current, cur_eval, radius, rng);
      if (cands.empty()) {
        ++streak;
        continue;
      }

      // relaxed region: link feasibility only
      int rel_pick = -1;
      double rel_g = kNegInf;
      std::vector<double> cand_g(cands.size(), kNegInf);
      for (std::size_t c = 0; c < cands.size(); ++c) {
        const ZoneEval e = evaluate_zone(v, cands[c].state);
        cand_g[c] = e.surplus;
        if (!e.clearable) continue;
        if (relaxed_tl.contains(cands[c].move)) continue;
        if (global.contains(e.surplus)) continue;
        if (e.surplus > rel_g) {
          rel_g = e.surplus;
          rel_pick = static_cast<int>(c);
        }
      }

      // compatible region: candidates repaired to satisfy price matching
      int comp_pick = -1;
      double comp_g = kNegInf;
      ZoneState comp_state;
      for (std::size_t c = 0; c < cands.size(); ++c) {
        if (compat_tl.contains(cands[c].move)) continue;
        const RepairResult r = repair_compatibility(v, cands[c].state, rng, cfg.surplus_tol);
        if (!r.repaired) continue;
        const ZoneEval e = evaluate_zone(v, r.state);
        if (!e.clearable) continue;
        if (global.contains(e.surplus)) continue;
        if (e.surplus > comp_g) {
          comp_g = e.surplus;
          comp_pick = static_cast<int>(c);
          comp_state = r.state;
        }
      }

      if (comp_pick >= 0) offer_best(comp_state, comp_g);
      if (rel_pick < 0 && comp_pick < 0) {
        ++streak;
        continue;
      }

      const bool take_relaxed = rel_pick >= 0 && (comp_pick < 0 || rel_g >= comp_g);
      const int pick = take_relaxed ? rel_pick : comp_pick;
      const TabuMove applied = cands[static_cast<std::size_t>(pick)].move;
      const TabuMove inverse{applied.bid,
                             current[static_cast<std::size_t>(applied.bid)]};
      if (take_relaxed) {
        current = cands[static_cast<std::size_t>(pick)].state;
        cur_g = rel_g;
        relaxed_tl.push(inverse);
      } else {
        current = comp_state;
        cur_g = comp_g;
        compat_tl.push(inverse);
      }
      cur_eval = evaluate_zone(v, current);
      global.insert(cur_g);

      if (cur_g > best_raw + cfg.surplus_tol) {
        best_raw = cur_g;
        streak = 0;
      } else {
        ++streak;
      }
    }
    if (deadline.expired()) break;
    if (!have_best) continue;
    if (best_g <= best_before_round + cfg.surplus_tol) break;  // round brought no improvement
    // jump: restart from the best solution found
    current = best_state;
    cur_eval = evaluate_zone(v, current);
    cur_g = cur_eval.surplus;
    streak = 0;
  }

  if (have_best) {
    res.feasible = true;
    res.state = best_state;
    res.surplus = best_g;
    return res;
  }
  // nothing compatible found: fall back to rejecting everything
  ZoneState rejected(v.bids.size(), std::nullopt);
  const RepairResult r = repair_compatibility(v, rejected, rng, cfg.surplus_tol);
  if (r.repaired) {
    const ZoneEval e = evaluate_zone(v, r.state);
    if (e.clearable) {
      res.feasible = true;
      res.state = r.state;
      res.surplus = e.surplus;
      return res;
    }
  }
  const ZoneEval e = evaluate_zone(v, rejected);
  res.feasible = false;
  res.state = rejected;
  res.surplus = e.surplus;
  return res;
}

}  // namespace zonalclear
