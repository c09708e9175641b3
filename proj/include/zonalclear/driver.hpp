#pragma once

// ATS outer loop: alternate parallel zonal tabu searches (flows fixed) with
// the price-flow QP (acceptance fixed), feed the QP's optimal flows back as
// the next round's fixed flows, stop when the surplus no longer improves,
// then repair price-matching violations and re-solve until the audit holds.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zonalclear/common.hpp"
#include "zonalclear/curves.hpp"
#include "zonalclear/flowqp.hpp"
#include "zonalclear/model.hpp"
#include "zonalclear/rng.hpp"
#include "zonalclear/tabu.hpp"
#include "zonalclear/threadpool.hpp"

namespace zonalclear {

struct AtsConfig {
  std::uint64_t seed = 1;
  TsConfig ts{};
  QpConfig qp{};
  int outer_cap = 10;
  double budget_seconds = 600.0;  // hard announcement deadline
  double improve_tol = 1e-3;      // "no longer improves" threshold, money
  int threads = 0;                // 0 -> ZONAL_CLEAR_THREADS or hardware
};

enum class Termination { converged, budget, iteration_cap, infeasible };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::budget: return "budget";
    case Termination::iteration_cap: return "iteration_cap";
    case Termination::infeasible: return "infeasible";
  }
  return "unknown";
}

struct OuterIterationTrace {
  int iteration = 0;
  double ts_surplus = 0;  // sum of zonal TS surpluses at the fixed flows
  double qp_surplus = 0;
  double qp_residual = 0;
  bool accepted = false;  // improved the incumbent and fed flows back
  std::vector<double> zone_seconds;
  double seconds = 0;
};

struct AtsResult {
  bool feasible = false;
  ClearingOutcome outcome;
  AcceptanceVector acceptance;
  AuditReport audit;
  InstanceShape shape;
  std::vector<OuterIterationTrace> trace;
  double pre_repair_surplus = 0;
  double post_repair_surplus = 0;
  int repair_rounds = 0;
  Termination termination = Termination::infeasible;
  double seconds = 0;
};

// g_a - g_b; throws when the results do not describe the same instance shape.
template <typename ResultA, typename ResultB>
double surplus_gap(const ResultA& a, const ResultB& b) {
  if (!(a.shape == b.shape))
    throw std::invalid_argument("surplus_gap: results describe different instances");
  return a.outcome.surplus - b.outcome.surplus;
}

namespace detail {

inline AcceptanceVector assemble_acceptance(const Instance& in,
                                            const std::vector<ZoneView>& views,
                                            const std::vector<ZoneState>& states) {
  AcceptanceVector y = AcceptanceVector::all_rejected(in);
  for (std::size_t z = 0; z < views.size(); ++z)
    for (std::size_t i = 0; i < views[z].bids.size(); ++i)
      y.start[static_cast<std::size_t>(views[z].bids[i])] = states[z][i];
  return y;
}

inline std::vector<ZoneState> slice_acceptance(const std::vector<ZoneView>& views,
                                               const AcceptanceVector& y) {
  std::vector<ZoneState> states(views.size());
  for (std::size_t z = 0; z < views.size(); ++z) {
    states[z].resize(views[z].bids.size());
    for (std::size_t i = 0; i < views[z].bids.size(); ++i)
      states[z][i] = y.start[static_cast<std::size_t>(views[z].bids[i])];
  }
  return states;
}

}  // namespace detail

inline AtsResult solve_ats(const Instance& in, const AtsConfig& cfg = {}) {
  validate(in);
  const auto t_start = Deadline::clock::now();
  const Deadline deadline = Deadline::after_seconds(cfg.budget_seconds);
  const int threads = resolve_threads(cfg.threads);
  const CurveSet curves = build_curves(in);

  AtsResult res;
  res.shape = InstanceShape::of(in);
  res.acceptance = AcceptanceVector::all_rejected(in);

  // initial fixed flows: the feasible point nearest zero
  std::vector<std::vector<double>> fixed_flows(in.lines.size());
  for (std::size_t l = 0; l < in.lines.size(); ++l) {
    const FlowPolytope p = build_flow_polytope(in.lines[l], in.initial_flow[l]);
    if (!p.feasible) {
      res.termination = Termination::infeasible;
      res.seconds = elapsed_seconds(t_start);
      return res;
    }
    fixed_flows[l] = feasible_flow_near(
        p, std::vector<double>(static_cast<std::size_t>(in.periods), 0.0));
  }

  bool have_incumbent = false;
  AcceptanceVector best_acceptance;
  QpSolution best_qp;
  double best_g = kNegInf;
  Termination termination = Termination::iteration_cap;

  for (int outer = 1; outer <= cfg.outer_cap; ++outer) {
    OuterIterationTrace tr;
    tr.iteration = outer;
    const auto t_iter = Deadline::clock::now();

    // keep a reserve of the budget for the QP and the final repair passes
    const double remaining = deadline.remaining_seconds();
    if (have_incumbent && remaining < 0.25 * cfg.budget_seconds) {
      termination = Termination::budget;
      break;
    }
    const Deadline zone_deadline =
        Deadline::after_seconds(std::max(0.05, remaining * (have_incumbent ? 0.5 : 0.4)));

    auto views = make_zone_views(in, curves, fixed_flows);
    std::vector<ZoneSearchResult> zres(views.size());
    std::vector<double> zone_secs(views.size(), 0.0);
    parallel_for(static_cast<int>(views.size()), threads, [&](int z) {
      const auto t0 = Deadline::clock::now();
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(z),
                          static_cast<std::uint64_t>(outer)));
      zres[static_cast<std::size_t>(z)] =
          search_zone(views[static_cast<std::size_t>(z)], cfg.ts, rng, zone_deadline);
      zone_secs[static_cast<std::size_t>(z)] = elapsed_seconds(t0);
    });
    tr.zone_seconds = zone_secs;
    double ts_total = 0;
    std::vector<ZoneState> states(views.size());
    for (std::size_t z = 0; z < views.size(); ++z) {
      states[z] = zres[z].state;
      if (std::isfinite(zres[z].surplus)) ts_total += zres[z].surplus;
    }
    tr.ts_surplus = ts_total;

    const AcceptanceVector acc = detail::assemble_acceptance(in, views, states);
    QpSolution qp = solve_price_flow(in, curves, acc, cfg.qp, &fixed_flows);
    if (qp.status == QpStatus::infeasible) {
      tr.seconds = elapsed_seconds(t_iter);
      res.trace.push_back(std::move(tr));
      if (have_incumbent) {
        termination = Termination::converged;
        break;
      }
      res.termination = Termination::infeasible;
      res.seconds = elapsed_seconds(t_start);
      return res;
    }
    tr.qp_surplus = qp.outcome.surplus;
    tr.qp_residual = qp.kkt_residual;

    if (qp.outcome.surplus > best_g + cfg.improve_tol) {
      best_g = qp.outcome.surplus;
      best_acceptance = acc;
      best_qp = std::move(qp);
      have_incumbent = true;
      fixed_flows = best_qp.outcome.flow;  // back-tracking
      tr.accepted = true;
      tr.seconds = elapsed_seconds(t_iter);
      res.trace.push_back(std::move(tr));
      if (outer == cfg.outer_cap) termination = Termination::iteration_cap;
      if (deadline.expired()) {
        termination = Termination::budget;
        break;
      }
      continue;
    }
    tr.seconds = elapsed_seconds(t_iter);
    res.trace.push_back(std::move(tr));
    termination = Termination::converged;
    break;
  }

  if (!have_incumbent) {
    res.termination = Termination::infeasible;
    res.seconds = elapsed_seconds(t_start);
    return res;
  }

  // final repair: accept-only fixes of (6)/(7) at the QP prices, re-solving
  // the price-flow problem until the audit is clean
  res.pre_repair_surplus = best_qp.outcome.surplus;
  AcceptanceVector acc = best_acceptance;
  QpSolution qp = std::move(best_qp);
  for (int round = 0; round <= static_cast<int>(in.bids.size()); ++round) {
    auto views = make_zone_views(in, curves, qp.outcome.flow);
    auto states = detail::slice_acceptance(views, acc);
    bool changed = false;
    for (std::size_t z = 0; z < views.size(); ++z) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(z), 0xf1f2f3f4ULL + static_cast<std::uint64_t>(round)));
      const RepairResult r = repair_compatibility(views[z], states[z], rng);
      if (r.repaired && !(r.state == states[z])) {
        states[z] = r.state;
        changed = true;
      }
    }
    if (!changed) break;
    res.repair_rounds = round + 1;
    const AcceptanceVector repaired = detail::assemble_acceptance(in, views, states);
    QpSolution qp2 = solve_price_flow(in, curves, repaired, cfg.qp, &qp.outcome.flow);
    if (qp2.status == QpStatus::infeasible) break;
    acc = repaired;
    qp = std::move(qp2);
  }
  res.post_repair_surplus = qp.outcome.surplus;

  res.acceptance = acc;
  res.outcome = std::move(qp.outcome);
  res.audit = audit(in, res.outcome, res.acceptance);
  res.feasible = res.audit.all_pass();
  res.termination = deadline.expired() ? Termination::budget : termination;
  res.seconds = elapsed_seconds(t_start);
  return res;
}

}  // namespace zonalclear
