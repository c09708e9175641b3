#pragma once

// Exact reference solver at desk scale: best-first branch-and-bound (or
// plain exhaustion) over acceptance vectors with the price-flow QP as the
// continuous subsolver, plus the iterative heuristic-cut reference used for
// run-time comparisons.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "zonalclear/common.hpp"
#include "zonalclear/curves.hpp"
#include "zonalclear/flowqp.hpp"
#include "zonalclear/model.hpp"

namespace zonalclear {

struct EnumerationCapExceeded : std::runtime_error {
  explicit EnumerationCapExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct OracleLimits {
  std::uint64_t enumeration_cap = 1'000'000;  // explored nodes before refusal
  bool branch_and_bound = true;               // false -> plain exhaustion
  QpConfig qp{};
  AuditTolerance tolerance{};
  Deadline deadline{};  // optional; returns best-so-far when hit
};

struct OracleResult {
  bool feasible = false;
  AcceptanceVector acceptance;
  ClearingOutcome outcome;
  AuditReport audit;
  InstanceShape shape;
  std::uint64_t nodes_explored = 0;
  std::uint64_t leaves_evaluated = 0;
  bool deadline_hit = false;
  int cut_rounds = 0;  // heuristic reference only
};

namespace detail {

// Free-flow relaxation support: per connected component of the line graph,
// all member curves merged into one. Ordering invariants are irrelevant
// here; only supply_at/demand_at and the clearing walk are used.
struct MergedCurves {
  std::vector<int> component_of_zone;
  int components = 0;
  std::vector<NetCurve> merged;  // [component * T + t]
};

inline MergedCurves merge_components(const Instance& in, const CurveSet& curves) {
  MergedCurves mc;
  std::vector<int> parent(static_cast<std::size_t>(in.zones));
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const Line& ln : in.lines) {
    const int a = find(ln.source), b = find(ln.sink);
    if (a != b) parent[static_cast<std::size_t>(a)] = b;
  }
  mc.component_of_zone.resize(static_cast<std::size_t>(in.zones));
  std::vector<int> label(static_cast<std::size_t>(in.zones), -1);
  for (int z = 0; z < in.zones; ++z) {
    const int root = find(z);
    if (label[static_cast<std::size_t>(root)] < 0)
      label[static_cast<std::size_t>(root)] = mc.components++;
    mc.component_of_zone[static_cast<std::size_t>(z)] = label[static_cast<std::size_t>(root)];
  }
  const auto T = static_cast<std::size_t>(in.periods);
  mc.merged.resize(static_cast<std::size_t>(mc.components) * T);
  for (auto& c : mc.merged) {
    c.price_min = in.price_min;
    c.price_max = in.price_max;
    c.supply_cover_top = in.price_min;
  }
  for (int z = 0; z < in.zones; ++z) {
    const int comp = mc.component_of_zone[static_cast<std::size_t>(z)];
    for (int t = 0; t < in.periods; ++t) {
      const NetCurve& src = curves.at(z, t);
      NetCurve& dst = mc.merged[static_cast<std::size_t>(comp) * T + static_cast<std::size_t>(t)];
      for (const CurvePiece& p : src.supply) {
        dst.supply.push_back(p);
        dst.supply_total += p.volume;
        dst.supply_cover_top = std::max(dst.supply_cover_top, p.hi);
      }
      for (const CurvePiece& p : src.demand) {
        dst.demand.push_back(p);
        dst.demand_total += p.volume;
      }
    }
  }
  for (auto& c : mc.merged) {
    std::sort(c.supply.begin(), c.supply.end(),
              [](const CurvePiece& a, const CurvePiece& b) { return a.lo < b.lo; });
    std::sort(c.demand.begin(), c.demand.end(),
              [](const CurvePiece& a, const CurvePiece& b) { return a.hi > b.hi; });
    double s = 0;
    for (const CurvePiece& p : c.supply) c.supply_cum.push_back(s -= p.volume);
    double d = 0;
    for (const CurvePiece& p : c.demand) c.demand_cum.push_back(d += p.volume);
  }
  return mc;
}

// Optimistic surplus gain of accepting a bid in the free-flow relaxation:
// marginal zone prices stay within the price bounds, so a demand unit gains
// at most (P_b - P_min) and a supply unit at most (P_max - P_b).
inline double optimistic_gain(const Instance& in, const NonConvexBid& bid) {
  double best = 0;
  for (const BidOption& o : bid.options) {
    double g = 0;
    for (double v : o.volumes)
      g += v > 0 ? v * (bid.price - in.price_min) : -v * (in.price_max - bid.price);
    best = std::max(best, g);
  }
  return std::max(best, 0.0);
}

// lexicographic key of an acceptance vector (rejected sorts first)
inline bool acceptance_less(const AcceptanceVector& a, const AcceptanceVector& b) {
  for (std::size_t i = 0; i < a.start.size(); ++i) {
    const Period ka = a.start[i] ? *a.start[i] + 1 : 0;
    const Period kb = b.start[i] ? *b.start[i] + 1 : 0;
    if (ka != kb) return ka < kb;
  }
  return false;
}

struct EnumerationProblem {
  const Instance* in = nullptr;
  const CurveSet* curves = nullptr;
  MergedCurves mc;
  std::vector<int> order;      // bid indices, mothers before children
  std::vector<int> mother_pos; // position in `order` of the mother, -1 if none
  std::vector<double> gain;    // optimistic per-bid gain, by order position
  std::vector<std::vector<int>> cuts;  // each: >= 1 of these bids accepted (by order position)

  void build(const Instance& inst, const CurveSet& cs) {
    in = &inst;
    curves = &cs;
    mc = merge_components(inst, cs);
    // topological order over the link forest
    const auto B = inst.bids.size();
    std::vector<int> depth(B, 0);
    for (std::size_t b = 0; b < B; ++b) {
      int cur = static_cast<int>(b);
      int d = 0;
      while (auto m = inst.mother_index(cur)) {
        cur = *m;
        ++d;
      }
      depth[b] = d;
    }
    order.resize(B);
    for (std::size_t b = 0; b < B; ++b) order[b] = static_cast<int>(b);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return depth[static_cast<std::size_t>(a)] <
                                                depth[static_cast<std::size_t>(b)]; });
    std::vector<int> pos_of(B);
    for (std::size_t k = 0; k < B; ++k) pos_of[static_cast<std::size_t>(order[k])] =
        static_cast<int>(k);
    mother_pos.assign(B, -1);
    gain.assign(B, 0.0);
    for (std::size_t k = 0; k < B; ++k) {
      const int b = order[k];
      if (auto m = inst.mother_index(b))
        mother_pos[k] = pos_of[static_cast<std::size_t>(*m)];
      gain[k] = optimistic_gain(inst, inst.bids[static_cast<std::size_t>(b)]);
    }
  }

  // decisions: -2 undecided, -1 rejected, >= 0 option index
  AcceptanceVector to_acceptance(const std::vector<int>& decisions) const {
    AcceptanceVector y = AcceptanceVector::all_rejected(*in);
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (decisions[k] < 0) continue;
      const auto& bid = in->bids[static_cast<std::size_t>(order[k])];
      y.start[static_cast<std::size_t>(order[k])] =
          bid.options[static_cast<std::size_t>(decisions[k])].start;
    }
    return y;
  }

  // admissible upper bound for completions of a partial assignment: the
  // free-flow (merged-component) clearing of decided volumes plus the
  // optimistic gains of undecided bids
  double bound(const std::vector<int>& decisions) const {
    const auto T = static_cast<std::size_t>(in->periods);
    std::vector<double> inj(static_cast<std::size_t>(mc.components) * T, 0.0);
    double decided_terms = 0;
    double undecided_gain = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (decisions[k] == -2) {
        undecided_gain += gain[k];
        continue;
      }
      if (decisions[k] == -1) continue;
      const NonConvexBid& bid = in->bids[static_cast<std::size_t>(order[k])];
      const BidOption& o = bid.options[static_cast<std::size_t>(decisions[k])];
      const int comp = mc.component_of_zone[static_cast<std::size_t>(bid.zone)];
      for (std::size_t j = 0; j < o.volumes.size(); ++j)
        inj[static_cast<std::size_t>(comp) * T + static_cast<std::size_t>(o.start) + j] +=
            o.volumes[j];
      decided_terms += bid.price * bid.total_volume(o.start);
    }
    double curve_part = 0;
    for (int c = 0; c < mc.components; ++c) {
      for (std::size_t t = 0; t < T; ++t) {
        const auto v = clear_zone_period_value(
            mc.merged[static_cast<std::size_t>(c) * T + t],
            inj[static_cast<std::size_t>(c) * T + t]);
        if (!v.feasible) return kInf;  // undecided bids may restore clearability
        curve_part += v.surplus;
      }
    }
    const double raw = curve_part + decided_terms + undecided_gain;
    return raw + 1e-7 * (1.0 + std::abs(raw));  // fp safety margin on admissibility
  }

  bool cuts_satisfiable(const std::vector<int>& decisions) const {
    for (const auto& cut : cuts) {
      bool ok = false;
      for (int pos : cut) {
        if (decisions[static_cast<std::size_t>(pos)] >= 0 ||
            decisions[static_cast<std::size_t>(pos)] == -2) {
          ok = true;
          break;
        }
      }
      if (!ok) return false;
    }
    return true;
  }
};

struct LeafCheck {
  bool qp_ok = false;       // price-flow subproblem solved
  bool compatible = false;  // families (6)/(7) hold at the QP prices
  QpSolution qp;
};

inline LeafCheck evaluate_leaf(const EnumerationProblem& prob, const AcceptanceVector& y,
                               const OracleLimits& limits) {
  LeafCheck lc;
  lc.qp = solve_price_flow(*prob.in, *prob.curves, y, limits.qp);
  if (lc.qp.status == QpStatus::infeasible) return lc;
  lc.qp_ok = true;
  const Instance& in = *prob.in;
  lc.compatible = true;
  for (std::size_t b = 0; b < in.bids.size() && lc.compatible; ++b) {
    if (y.start[b]) continue;
    const auto m = in.mother_index(static_cast<int>(b));
    if (m && !y.start[static_cast<std::size_t>(*m)]) continue;
    for (const BidOption& o : in.bids[b].options) {
      if (bid_surplus(in, static_cast<int>(b), o.start, lc.qp.outcome.price) >
          limits.tolerance.balance) {
        lc.compatible = false;
        break;
      }
    }
  }
  return lc;
}

struct SearchOutcome {
  bool found = false;
  AcceptanceVector acceptance;
  QpSolution qp;
  std::uint64_t nodes = 0;
  std::uint64_t leaves = 0;
  bool deadline_hit = false;
};

// Core enumeration shared by the exact solver and the heuristic master.
// `require_compatibility` decides whether families (6)/(7) gate feasibility.
inline SearchOutcome enumerate_best(const EnumerationProblem& prob, const OracleLimits& limits,
                                    bool require_compatibility) {
  SearchOutcome best;
  const auto B = prob.order.size();

  auto offer = [&](const AcceptanceVector& y, LeafCheck&& lc) {
    if (!lc.qp_ok) return;
    if (require_compatibility && !lc.compatible) return;
    const double g = lc.qp.outcome.surplus;
    if (!best.found || g > best.qp.outcome.surplus ||
        (g == best.qp.outcome.surplus && acceptance_less(y, best.acceptance))) {
      best.found = true;
      best.acceptance = y;
      best.qp = std::move(lc.qp);
    }
  };

  auto options_at = [&](const std::vector<int>& decisions, std::size_t k) {
    // -1 plus each start; children of rejected mothers must be rejected
    const int mpos = prob.mother_pos[k];
    const bool mother_rejected = mpos >= 0 && decisions[static_cast<std::size_t>(mpos)] == -1;
    const auto& bid = prob.in->bids[static_cast<std::size_t>(prob.order[k])];
    const int nopts = mother_rejected ? 0 : static_cast<int>(bid.options.size());
    return nopts;
  };

  if (!limits.branch_and_bound) {
    // plain depth-first exhaustion in lexicographic order
    std::vector<int> decisions(B, -2);
    std::uint64_t visited = 0;
    std::function<void(std::size_t)> dfs = [&](std::size_t k) {
      if (best.deadline_hit) return;
      if (limits.deadline.armed() && limits.deadline.expired()) {
        best.deadline_hit = true;
        return;
      }
      if (++visited > limits.enumeration_cap)
        throw EnumerationCapExceeded("oracle: enumeration cap exceeded");
      ++best.nodes;
      if (k == B) {
        if (!prob.cuts_satisfiable(decisions)) return;
        const AcceptanceVector y = prob.to_acceptance(decisions);
        ++best.leaves;
        offer(y, evaluate_leaf(prob, y, limits));
        return;
      }
      const int nopts = options_at(decisions, k);
      for (int opt = -1; opt < nopts; ++opt) {
        decisions[k] = opt;
        if (prob.cuts_satisfiable(decisions)) dfs(k + 1);
      }
      decisions[k] = -2;
    };
    dfs(0);
    return best;
  }

  struct Node {
    double bound;
    std::uint64_t seq;
    std::vector<int> decisions;
  };
  auto cmp = [](const Node& a, const Node& b) {
    if (a.bound != b.bound) return a.bound < b.bound;  // max-heap on bound
    return a.seq > b.seq;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(cmp)> open(cmp);
  std::uint64_t seq = 0;
  {
    std::vector<int> root(B, -2);
    open.push({prob.bound(root), seq++, std::move(root)});
  }
  std::uint64_t explored = 0;
  while (!open.empty()) {
    if (limits.deadline.armed() && limits.deadline.expired()) {
      best.deadline_hit = true;
      break;
    }
    Node node = open.top();
    open.pop();
    if (++explored > limits.enumeration_cap)
      throw EnumerationCapExceeded("oracle: enumeration cap exceeded");
    ++best.nodes;
    if (best.found && node.bound <= best.qp.outcome.surplus + 1e-12) break;
    std::size_t k = 0;
    while (k < B && node.decisions[k] != -2) ++k;
    if (k == B) {
      if (!prob.cuts_satisfiable(node.decisions)) continue;
      const AcceptanceVector y = prob.to_acceptance(node.decisions);
      ++best.leaves;
      offer(y, evaluate_leaf(prob, y, limits));
      continue;
    }
    const int nopts = options_at(node.decisions, k);
    for (int opt = -1; opt < nopts; ++opt) {
      Node child;
      child.decisions = node.decisions;
      child.decisions[k] = opt;
      if (!prob.cuts_satisfiable(child.decisions)) continue;
      child.bound = prob.bound(child.decisions);
      if (best.found && child.bound <= best.qp.outcome.surplus + 1e-12) continue;
      child.seq = seq++;
      open.push(std::move(child));
    }
  }
  return best;
}

inline OracleResult finish_result(const Instance& in, const OracleLimits& limits,
                                  SearchOutcome&& s) {
  OracleResult r;
  r.shape = InstanceShape::of(in);
  r.nodes_explored = s.nodes;
  r.leaves_evaluated = s.leaves;
  r.deadline_hit = s.deadline_hit;
  if (!s.found) {
    r.acceptance = AcceptanceVector::all_rejected(in);
    return r;
  }
  r.acceptance = s.acceptance;
  r.outcome = std::move(s.qp.outcome);
  r.audit = audit(in, r.outcome, r.acceptance, limits.tolerance);
  r.feasible = r.audit.all_pass();
  return r;
}

}  // namespace detail

// Enumerates acceptance vectors satisfying the structural constraints, solves
// the price-flow problem for each, keeps the best fully feasible solution.
// Optimality is by exhaustion (or an admissible free-flow bound).
inline OracleResult solve_exact(const Instance& in, const OracleLimits& limits = {}) {
  validate(in);
  const CurveSet curves = build_curves(in);
  detail::EnumerationProblem prob;
  prob.build(in, curves);
  auto s = detail::enumerate_best(prob, limits, /*require_compatibility=*/true);
  return detail::finish_result(in, limits, std::move(s));
}

// Iterative-deepening reference: repeatedly solve the link-feasible master by
// enumeration/bounding, and whenever the optimum leaves a positive-surplus
// bid rejected, cut away every vector that keeps all violating bids rejected.
inline OracleResult heuristic_cut_reference(const Instance& in, const OracleLimits& limits = {}) {
  validate(in);
  const CurveSet curves = build_curves(in);
  detail::EnumerationProblem prob;
  prob.build(in, curves);

  std::vector<int> pos_of(in.bids.size());
  for (std::size_t k = 0; k < prob.order.size(); ++k)
    pos_of[static_cast<std::size_t>(prob.order[k])] = static_cast<int>(k);

  OracleResult result;
  result.shape = InstanceShape::of(in);
  result.acceptance = AcceptanceVector::all_rejected(in);
  std::uint64_t nodes = 0, leaves = 0;

  const int max_rounds = 1 + static_cast<int>(in.bids.size()) * 32;
  for (int round = 0; round < max_rounds; ++round) {
    auto s = detail::enumerate_best(prob, limits, /*require_compatibility=*/false);
    nodes += s.nodes;
    leaves += s.leaves;
    result.cut_rounds = round + 1;
    if (s.deadline_hit) result.deadline_hit = true;
    if (!s.found) break;  // cuts exhausted the space

    // violating bids: rejected with positive surplus at some start, and
    // either motherless or with an accepted mother
    std::vector<int> violating;
    for (std::size_t b = 0; b < in.bids.size(); ++b) {
      if (s.acceptance.start[b]) continue;
      const auto m = in.mother_index(static_cast<int>(b));
      if (m && !s.acceptance.start[static_cast<std::size_t>(*m)]) continue;
      for (const BidOption& o : in.bids[b].options) {
        if (bid_surplus(in, static_cast<int>(b), o.start, s.qp.outcome.price) >
            limits.tolerance.balance) {
          violating.push_back(pos_of[b]);
          break;
        }
      }
    }
    if (violating.empty()) {
      result.acceptance = s.acceptance;
      result.outcome = std::move(s.qp.outcome);
      result.audit = audit(in, result.outcome, result.acceptance, limits.tolerance);
      result.feasible = result.audit.all_pass();
      break;
    }
    if (result.deadline_hit) break;
    prob.cuts.push_back(std::move(violating));
  }
  result.nodes_explored = nodes;
  result.leaves_evaluated = leaves;
  return result;
}

}  // namespace zonalclear
