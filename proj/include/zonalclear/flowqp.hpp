#pragma once

// Price-flow problem: maximize surplus over (fractions, flows) subject to
// balance, fill order, caps and ramps, with the acceptance vector fixed.
// The inner fraction problem is solved exactly by curve clearing; the outer
// flow problem is a low-dimensional concave program handled by projected
// supergradient ascent with an exact Newton polish, followed by shadow-price
// recovery so that the price-flow conditions hold at the optimum.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "zonalclear/common.hpp"
#include "zonalclear/curves.hpp"
#include "zonalclear/model.hpp"

namespace zonalclear {

// Per-line feasible set: box caps per period plus ramp coupling between
// consecutive periods, anchored at the constant initial flow.
struct FlowPolytope {
  int periods = 0;
  double initial_flow = 0;
  std::vector<double> upper, lower, ramp;  // raw data
  std::vector<double> box_hi, box_lo;      // period-0 ramp folded into the box
  std::vector<double> reach_lo, reach_hi;  // forward interval propagation
  bool feasible = false;
};

inline FlowPolytope build_flow_polytope(const Line& line, double initial_flow) {
  FlowPolytope p;
  p.periods = static_cast<int>(line.upper_cap.size());
  p.initial_flow = initial_flow;
  p.upper = line.upper_cap;
  p.lower = line.lower_cap;
  p.ramp = line.ramp_limit;
  p.box_hi = p.upper;
  p.box_lo = p.lower;
  if (p.periods > 0 && std::isfinite(p.ramp[0])) {
    p.box_hi[0] = std::min(p.box_hi[0], initial_flow + p.ramp[0]);
    p.box_lo[0] = std::max(p.box_lo[0], initial_flow - p.ramp[0]);
  }
  p.reach_lo.resize(static_cast<std::size_t>(p.periods));
  p.reach_hi.resize(static_cast<std::size_t>(p.periods));
  p.feasible = true;
  double lo = initial_flow, hi = initial_flow;
  for (int t = 0; t < p.periods; ++t) {
    const auto u = static_cast<std::size_t>(t);
    const double r = t == 0 ? 0.0 : p.ramp[u];  // period-0 ramp already folded
    if (t == 0) {
      lo = p.box_lo[u];
      hi = p.box_hi[u];
    } else if (std::isfinite(r)) {
      lo = std::max(lo - r, p.box_lo[u]);
      hi = std::min(hi + r, p.box_hi[u]);
    } else {
      lo = p.box_lo[u];
      hi = p.box_hi[u];
    }
    if (lo > hi + 1e-12) {
      p.feasible = false;
      return p;
    }
    hi = std::max(hi, lo);
    p.reach_lo[u] = lo;
    p.reach_hi[u] = hi;
  }
  return p;
}

// A feasible point close to `target`, by backward selection through the
// reachable intervals. Not the Euclidean projection; used for starts.
inline std::vector<double> feasible_flow_near(const FlowPolytope& p,
                                              const std::vector<double>& target) {
  if (!p.feasible) throw std::domain_error("feasible_flow_near: empty flow polytope");
  const auto T = static_cast<std::size_t>(p.periods);
  std::vector<double> f(T, 0.0);
  if (T == 0) return f;
  f[T - 1] = std::clamp(target[T - 1], p.reach_lo[T - 1], p.reach_hi[T - 1]);
  for (std::size_t t = T - 1; t-- > 0;) {
    double lo = p.reach_lo[t], hi = p.reach_hi[t];
    const double r = p.ramp[t + 1];
    if (std::isfinite(r)) {
      lo = std::max(lo, f[t + 1] - r);
      hi = std::min(hi, f[t + 1] + r);
    }
    f[t] = std::clamp(target[t], lo, hi);
  }
  return f;
}

namespace detail {

// Exact Euclidean projection onto the box+ramp chain via a primal active-set
// method. The working-set equality problems decompose into rigid blocks of
// consecutive periods joined by active ramps, so each solve is closed-form.
class ChainProjector {
 public:
  explicit ChainProjector(const FlowPolytope& p) : p_(&p), T_(p.periods) {
    offset_.resize(static_cast<std::size_t>(std::max(T_, 1)));
  }

  std::vector<double> project(const std::vector<double>& c) {
    if (!p_->feasible) throw std::domain_error("project_line_flows: empty flow polytope");
    const auto T = static_cast<std::size_t>(T_);
    if (c.size() != T) throw std::invalid_argument("project_line_flows: candidate size mismatch");
    if (T == 0) return {};

    pin_.assign(T, 0);
    link_.assign(T, 0);
    std::vector<double> f = feasible_flow_near(*p_, c);
    std::vector<double> fstar(T), d(T), lambda_pin(T), lambda_link(T);

    const int max_iter = 30 * T_ + 60;
    for (int iter = 0; iter < max_iter; ++iter) {
      solve_eqp(c, fstar);
      for (std::size_t t = 0; t < T; ++t) d[t] = fstar[t] - f[t];

      // ratio test against constraints outside the working set
      double alpha = 1.0;
      int block_kind = 0;  // 1 box-hi, 2 box-lo, 3 link-up, 4 link-down
      int block_t = -1;
      auto consider = [&](double a, int kind, int t) {
        a = std::max(a, 0.0);
        if (a < alpha - 1e-14) {
          alpha = a;
          block_kind = kind;
          block_t = t;
        }
      };
      for (std::size_t t = 0; t < T; ++t) {
        if (pin_[t] != 0 || std::abs(d[t]) < 1e-13) continue;
        if (d[t] > 0 && std::isfinite(p_->box_hi[t]))
          consider((p_->box_hi[t] - f[t]) / d[t], 1, static_cast<int>(t));
        if (d[t] < 0 && std::isfinite(p_->box_lo[t]))
          consider((p_->box_lo[t] - f[t]) / d[t], 2, static_cast<int>(t));
      }
      for (std::size_t t = 1; t < T; ++t) {
        if (link_[t] != 0 || !std::isfinite(p_->ramp[t])) continue;
        const double g = f[t] - f[t - 1];
        const double dg = d[t] - d[t - 1];
        if (std::abs(dg) < 1e-13) continue;
        if (dg > 0)
          consider((p_->ramp[t] - g) / dg, 3, static_cast<int>(t));
        else
          consider((-p_->ramp[t] - g) / dg, 4, static_cast<int>(t));
      }

      if (block_t >= 0) {
        for (std::size_t t = 0; t < T; ++t) f[t] += alpha * d[t];
        const auto bt = static_cast<std::size_t>(block_t);
        switch (block_kind) {
          case 1: pin_[bt] = +1; f[bt] = p_->box_hi[bt]; break;
          case 2: pin_[bt] = -1; f[bt] = p_->box_lo[bt]; break;
          case 3: link_[bt] = +1; break;
          case 4: link_[bt] = -1; break;
        }
        continue;
      }

      f = fstar;
      // multipliers; drop the most negative active constraint if any
      compute_duals(c, f, lambda_pin, lambda_link);
      double worst = -1e-10;
      int drop_kind = 0, drop_t = -1;
      for (std::size_t t = 0; t < T; ++t) {
        if (pin_[t] != 0 && lambda_pin[t] < worst) {
          worst = lambda_pin[t];
          drop_kind = 1;
          drop_t = static_cast<int>(t);
        }
        if (link_[t] != 0 && lambda_link[t] < worst) {
          worst = lambda_link[t];
          drop_kind = 2;
          drop_t = static_cast<int>(t);
        }
      }
      if (drop_t < 0) return f;
      if (drop_kind == 1)
        pin_[static_cast<std::size_t>(drop_t)] = 0;
      else
        link_[static_cast<std::size_t>(drop_t)] = 0;
    }
    return f;  // iteration safety net: feasible and near-optimal
  }

 private:
  void solve_eqp(const std::vector<double>& c, std::vector<double>& out) const {
    const auto T = static_cast<std::size_t>(T_);
    std::size_t a = 0;
    while (a < T) {
      std::size_t b = a;
      while (b + 1 < T && link_[b + 1] != 0) ++b;
      // offsets within block [a..b]
      double delta = 0;
      double base_pin = 0;
      bool pinned = false;
      double sum = 0;
      for (std::size_t t = a; t <= b; ++t) {
        if (t > a) delta += link_[t] * p_->ramp[t];
        offset_[t] = delta;
        if (!pinned && pin_[t] != 0) {
          pinned = true;
          base_pin = (pin_[t] > 0 ? p_->box_hi[t] : p_->box_lo[t]) - delta;
        }
        sum += c[t] - delta;
      }
      const double base = pinned ? base_pin : sum / static_cast<double>(b - a + 1);
      for (std::size_t t = a; t <= b; ++t) out[t] = base + offset_[t];
      a = b + 1;
    }
  }

  void compute_duals(const std::vector<double>& c, const std::vector<double>& f,
                     std::vector<double>& lambda_pin, std::vector<double>& lambda_link) const {
    const auto T = static_cast<std::size_t>(T_);
    std::fill(lambda_pin.begin(), lambda_pin.end(), 0.0);
    std::fill(lambda_link.begin(), lambda_link.end(), 0.0);
    std::size_t a = 0;
    while (a < T) {
      std::size_t b = a;
      while (b + 1 < T && link_[b + 1] != 0) ++b;
      double block_sum = 0;
      int pin_pos = -1;
      double pin_sign = 0;
      for (std::size_t t = a; t <= b; ++t) {
        block_sum += c[t] - f[t];
        if (pin_pos < 0 && pin_[t] != 0) {
          pin_pos = static_cast<int>(t);
          pin_sign = pin_[t];
        }
      }
      double lam_pin = 0;
      if (pin_pos >= 0) {
        lam_pin = pin_sign * block_sum;
        lambda_pin[static_cast<std::size_t>(pin_pos)] = lam_pin;
      }
      double suffix = 0;
      for (std::size_t t = b; t > a; --t) {
        suffix += c[t] - f[t];
        const double pin_term = (pin_pos >= 0 && static_cast<std::size_t>(pin_pos) >= t)
                                    ? pin_sign * lam_pin
                                    : 0.0;
        lambda_link[t] = link_[t] * (suffix - pin_term);
      }
      a = b + 1;
    }
  }

  const FlowPolytope* p_;
  int T_;
  std::vector<int> pin_, link_;
  mutable std::vector<double> offset_;
};

// dense linear solve with partial pivoting; A is n x n row-major
inline bool gauss_solve(std::vector<double>& A, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[static_cast<std::size_t>(r) * n + col]) >
          std::abs(A[static_cast<std::size_t>(piv) * n + col]))
        piv = r;
    if (std::abs(A[static_cast<std::size_t>(piv) * n + col]) < 1e-14) return false;
    if (piv != col) {
      for (int k = 0; k < n; ++k)
        std::swap(A[static_cast<std::size_t>(piv) * n + k],
                  A[static_cast<std::size_t>(col) * n + k]);
      std::swap(b[static_cast<std::size_t>(piv)], b[static_cast<std::size_t>(col)]);
    }
    const double p = A[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double m = A[static_cast<std::size_t>(r) * n + col] / p;
      if (m == 0) continue;
      for (int k = col; k < n; ++k)
        A[static_cast<std::size_t>(r) * n + k] -= m * A[static_cast<std::size_t>(col) * n + k];
      b[static_cast<std::size_t>(r)] -= m * b[static_cast<std::size_t>(col)];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[static_cast<std::size_t>(r)];
    for (int k = r + 1; k < n; ++k)
      s -= A[static_cast<std::size_t>(r) * n + k] * b[static_cast<std::size_t>(k)];
    b[static_cast<std::size_t>(r)] = s / A[static_cast<std::size_t>(r) * n + r];
  }
  return true;
}

// min ||A x - b||_2, A is m x n row-major, via ridge-stabilized normal
// equations; adequate for the small shadow-price systems here.
inline std::vector<double> least_squares(const std::vector<double>& A,
                                         const std::vector<double>& b, int m, int n) {
  std::vector<double> AtA(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> Atb(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < m; ++r) {
    for (int i = 0; i < n; ++i) {
      const double ai = A[static_cast<std::size_t>(r) * n + i];
      if (ai == 0) continue;
      Atb[static_cast<std::size_t>(i)] += ai * b[static_cast<std::size_t>(r)];
      for (int j = 0; j < n; ++j)
        AtA[static_cast<std::size_t>(i) * n + j] += ai * A[static_cast<std::size_t>(r) * n + j];
    }
  }
  for (int i = 0; i < n; ++i) AtA[static_cast<std::size_t>(i) * n + i] += 1e-12;
  if (!gauss_solve(AtA, Atb, n)) return std::vector<double>(static_cast<std::size_t>(n), 0.0);
  return Atb;
}

}  // namespace detail

// Euclidean projection of per-period candidate flows onto one line's
// box+ramp polytope. Throws std::domain_error when the polytope is empty.
inline std::vector<double> project_line_flows(const FlowPolytope& p,
                                              const std::vector<double>& candidate) {
  detail::ChainProjector proj(p);
  return proj.project(candidate);
}

inline std::vector<double> project_line_flows(const Line& line, double initial_flow,
                                              const std::vector<double>& candidate) {
  return project_line_flows(build_flow_polytope(line, initial_flow), candidate);
}

struct QpConfig {
  double step_scale = 0.01;  // MW per unit price gap, times (price_max - price_min)
  int max_iterations = 5000;
  double pg_tolerance = 1e-6;
  double armijo_sigma = 1e-4;
  int polish_rounds = 40;
  double active_tolerance = 1e-6;
};

enum class QpStatus { optimal, iteration_cap, infeasible };

struct QpSolution {
  QpStatus status = QpStatus::infeasible;
  ClearingOutcome outcome;
  AcceptanceVector acceptance;
  InstanceShape shape;
  double kkt_residual = kInf;
  double pg_residual = kInf;
  int iterations = 0;
};

namespace detail {

struct QpWork {
  const Instance* in = nullptr;
  const CurveSet* curves = nullptr;
  std::vector<std::vector<double>> injection0;  // [zone][t], accepted bid volumes
  double bid_constant = 0;
  std::vector<FlowPolytope> polytopes;

  // scratch
  std::vector<std::vector<double>> price;

  bool evaluate(const std::vector<std::vector<double>>& flow, double& surplus) {
    const auto N = static_cast<std::size_t>(in->zones);
    const auto T = static_cast<std::size_t>(in->periods);
    if (price.size() != N) price.assign(N, std::vector<double>(T, 0.0));
    double g = bid_constant;
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t t = 0; t < T; ++t) {
        double inj = injection0[n][t];
        for (std::size_t l = 0; l < in->lines.size(); ++l) {
          if (static_cast<std::size_t>(in->lines[l].source) == n) inj += flow[l][t];
          if (static_cast<std::size_t>(in->lines[l].sink) == n) inj -= flow[l][t];
        }
        const auto v = clear_zone_period_value(
            curves->at(static_cast<ZoneId>(n), static_cast<Period>(t)), inj);
        if (!v.feasible) return false;
        g += v.surplus;
        price[n][t] = v.price;
      }
    }
    surplus = g;
    return true;
  }
};

inline std::vector<std::vector<double>> price_gradient(const QpWork& w) {
  const auto T = static_cast<std::size_t>(w.in->periods);
  std::vector<std::vector<double>> grad(w.in->lines.size(), std::vector<double>(T, 0.0));
  for (std::size_t l = 0; l < w.in->lines.size(); ++l) {
    const Line& ln = w.in->lines[l];
    for (std::size_t t = 0; t < T; ++t)
      grad[l][t] = w.price[static_cast<std::size_t>(ln.sink)][t] -
                   w.price[static_cast<std::size_t>(ln.source)][t];
  }
  return grad;
}

}  // namespace detail

// Maximizes surplus over (x, f) subject to balance, fill order, caps and
// ramps for a fixed acceptance vector, then recovers the shadow prices.
inline QpSolution solve_price_flow(const Instance& in, const CurveSet& curves,
                                   const AcceptanceVector& acceptance,
                                   const QpConfig& cfg = {},
                                   const std::vector<std::vector<double>>* warm_flows = nullptr) {
  validate_acceptance(in, acceptance);
  const auto N = static_cast<std::size_t>(in.zones);
  const auto T = static_cast<std::size_t>(in.periods);
  const auto L = in.lines.size();

  QpSolution sol;
  sol.acceptance = acceptance;
  sol.shape = InstanceShape::of(in);

  detail::QpWork w;
  w.in = &in;
  w.curves = &curves;
  w.injection0.assign(N, std::vector<double>(T, 0.0));
  for (std::size_t b = 0; b < in.bids.size(); ++b) {
    if (!acceptance.start[b]) continue;
    const NonConvexBid& bid = in.bids[b];
    const BidOption* o = bid.option_for(*acceptance.start[b]);
    for (std::size_t k = 0; k < o->volumes.size(); ++k)
      w.injection0[static_cast<std::size_t>(bid.zone)][static_cast<std::size_t>(o->start) + k] +=
          o->volumes[k];
    w.bid_constant += bid.price * bid.total_volume(*acceptance.start[b]);
  }

  for (std::size_t l = 0; l < L; ++l) {
    w.polytopes.push_back(build_flow_polytope(in.lines[l], in.initial_flow[l]));
    if (!w.polytopes.back().feasible) return sol;  // infeasible status
  }

  // start: warm flows if given, projected; otherwise nearest-to-zero
  std::vector<std::vector<double>> f(L, std::vector<double>(T, 0.0));
  for (std::size_t l = 0; l < L; ++l) {
    const std::vector<double> target =
        warm_flows != nullptr ? (*warm_flows)[l] : std::vector<double>(T, 0.0);
    f[l] = feasible_flow_near(w.polytopes[l], target);
  }

  double g = 0;
  if (!w.evaluate(f, g)) {
    if (warm_flows == nullptr) return sol;
    // fall back to the nearest-to-zero start before giving up
    for (std::size_t l = 0; l < L; ++l)
      f[l] = feasible_flow_near(w.polytopes[l], std::vector<double>(T, 0.0));
    if (!w.evaluate(f, g)) return sol;
  }

  const double step0 = cfg.step_scale * (in.price_max - in.price_min);
  double step = step0;
  const double step_min = 1e-9 * step0;
  double residual = kInf;
  int iter = 0;

  std::vector<std::vector<double>> trial(L, std::vector<double>(T, 0.0));
  auto project_step = [&](const std::vector<std::vector<double>>& grad, double s,
                          std::vector<std::vector<double>>& out) {
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> cand(T);
      for (std::size_t t = 0; t < T; ++t) cand[t] = f[l][t] + s * grad[l][t];
      out[l] = project_line_flows(w.polytopes[l], cand);
    }
  };
  auto pg_residual_of = [&](const std::vector<std::vector<double>>& grad) {
    project_step(grad, step0, trial);
    double r = 0;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t t = 0; t < T; ++t) r = std::max(r, std::abs(trial[l][t] - f[l][t]));
    return r / step0;
  };

  if (L > 0) {
    for (; iter < cfg.max_iterations; ++iter) {
      auto grad = detail::price_gradient(w);
      residual = pg_residual_of(grad);
      if (residual <= cfg.pg_tolerance) break;

      bool accepted = false;
      while (step >= step_min) {
        project_step(grad, step, trial);
        double dirderiv = 0;
        for (std::size_t l = 0; l < L; ++l)
          for (std::size_t t = 0; t < T; ++t) dirderiv += grad[l][t] * (trial[l][t] - f[l][t]);
        double g_trial = 0;
        if (dirderiv > 0 && w.evaluate(trial, g_trial) &&
            g_trial >= g + cfg.armijo_sigma * dirderiv) {
          f = trial;
          g = g_trial;
          accepted = true;
          step = std::min(step * 1.3, step0);
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;  // nonsmooth point or numerical floor
    }

    // Newton polish on the per-period stationarity system of lines away from
    // their caps; skipped while any ramp constraint is near-active.
    bool ramp_active = false;
    for (std::size_t l = 0; l < L && !ramp_active; ++l) {
      for (std::size_t t = 0; t < T; ++t) {
        const double r = w.polytopes[l].ramp[t];
        if (!std::isfinite(r)) continue;
        const double prev = t == 0 ? w.polytopes[l].initial_flow : f[l][t - 1];
        if (std::abs(std::abs(f[l][t] - prev) - r) <= cfg.active_tolerance) {
          ramp_active = true;
          break;
        }
      }
    }
    if (!ramp_active) {
      double res = kInf;
      for (int round = 0; round < cfg.polish_rounds; ++round) {
        // residual restricted to lines free of their caps
        auto free_res = [&]() {
          double r = 0;
          for (std::size_t l = 0; l < L; ++l) {
            const Line& ln = in.lines[l];
            for (std::size_t t = 0; t < T; ++t) {
              const double dp = w.price[static_cast<std::size_t>(ln.sink)][t] -
                                w.price[static_cast<std::size_t>(ln.source)][t];
              const bool at_hi = ln.upper_cap[t] - f[l][t] <= cfg.active_tolerance;
              const bool at_lo = f[l][t] - ln.lower_cap[t] <= cfg.active_tolerance;
              if (at_hi && dp >= 0) continue;
              if (at_lo && dp <= 0) continue;
              if (at_hi || at_lo) continue;  // pinned; handled by duals
              r = std::max(r, std::abs(dp));
            }
          }
          return r;
        };
        res = free_res();
        if (res <= 1e-12) break;

        auto fnew = f;
        for (std::size_t t = 0; t < T; ++t) {
          std::vector<int> freel;
          for (std::size_t l = 0; l < L; ++l) {
            const Line& ln = in.lines[l];
            const bool at_hi = ln.upper_cap[t] - f[l][t] <= cfg.active_tolerance;
            const bool at_lo = f[l][t] - ln.lower_cap[t] <= cfg.active_tolerance;
            if (!at_hi && !at_lo) freel.push_back(static_cast<int>(l));
          }
          const int n = static_cast<int>(freel.size());
          if (n == 0) continue;
          std::vector<double> slope(N, 0.0);
          for (std::size_t z = 0; z < N; ++z)
            slope[z] = price_sensitivity(curves.at(static_cast<ZoneId>(z), static_cast<Period>(t)),
                                         w.price[z][t]);
          std::vector<double> J(static_cast<std::size_t>(n) * n, 0.0);
          std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
          for (int i = 0; i < n; ++i) {
            const Line& li = in.lines[static_cast<std::size_t>(freel[static_cast<std::size_t>(i)])];
            const auto ei = static_cast<std::size_t>(li.sink);
            const auto si = static_cast<std::size_t>(li.source);
            rhs[static_cast<std::size_t>(i)] = -(w.price[ei][t] - w.price[si][t]);
            for (int j = 0; j < n; ++j) {
              const Line& lj =
                  in.lines[static_cast<std::size_t>(freel[static_cast<std::size_t>(j)])];
              double v = 0;
              if (static_cast<std::size_t>(lj.source) == ei) v += slope[ei];
              if (static_cast<std::size_t>(lj.sink) == ei) v -= slope[ei];
              if (static_cast<std::size_t>(lj.source) == si) v -= slope[si];
              if (static_cast<std::size_t>(lj.sink) == si) v += slope[si];
              J[static_cast<std::size_t>(i) * n + j] = v;
            }
            J[static_cast<std::size_t>(i) * n + i] -= 1e-10;
          }
          if (!detail::gauss_solve(J, rhs, n)) continue;
          for (int i = 0; i < n; ++i) {
            const auto l = static_cast<std::size_t>(freel[static_cast<std::size_t>(i)]);
            fnew[l][t] = f[l][t] + rhs[static_cast<std::size_t>(i)];
          }
        }
        for (std::size_t l = 0; l < L; ++l) fnew[l] = project_line_flows(w.polytopes[l], fnew[l]);

        auto saved_price = w.price;
        double g_new = 0;
        if (!w.evaluate(fnew, g_new)) {
          w.price = saved_price;
          break;
        }
        // accept only if the stationarity residual improves
        double res_new = free_res();
        if (res_new < res) {
          f = fnew;
          g = g_new;
        } else {
          w.price = saved_price;
          w.evaluate(f, g);
          break;
        }
      }
      auto grad = detail::price_gradient(w);
      residual = pg_residual_of(grad);
    }
  } else {
    residual = 0;
  }

  sol.status = (L == 0 || residual <= cfg.pg_tolerance) ? QpStatus::optimal
                                                        : QpStatus::iteration_cap;
  sol.iterations = iter;
  sol.pg_residual = L == 0 ? 0.0 : residual;

  // materialize the outcome at the final flows
  ClearingOutcome& out = sol.outcome;
  out.fraction.assign(in.segments.size(), 0.0);
  out.price.assign(N, std::vector<double>(T, in.price_min));
  out.flow = f;
  out.mu_upper.assign(L, std::vector<double>(T, 0.0));
  out.mu_lower.assign(L, std::vector<double>(T, 0.0));
  out.rho_upper.assign(L, std::vector<double>(T, 0.0));
  out.rho_lower.assign(L, std::vector<double>(T, 0.0));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t t = 0; t < T; ++t) {
      double inj = w.injection0[n][t];
      for (std::size_t l = 0; l < L; ++l) {
        if (static_cast<std::size_t>(in.lines[l].source) == n) inj += f[l][t];
        if (static_cast<std::size_t>(in.lines[l].sink) == n) inj -= f[l][t];
      }
      const auto cl =
          clear_zone_period(curves.at(static_cast<ZoneId>(n), static_cast<Period>(t)), inj);
      if (!cl.feasible) {
        sol.status = QpStatus::infeasible;
        return sol;
      }
      out.price[n][t] = cl.price;
      for (const auto& [seg, x] : cl.fractions) out.fraction[static_cast<std::size_t>(seg)] = x;
    }
  }
  out.surplus = evaluate_surplus(in, out.fraction, acceptance);

  // shadow-price recovery: least squares on the stationarity equations,
  // restricted to active constraints, negatives clipped at zero
  double stationarity = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const Line& ln = in.lines[l];
    // variables: 0..T-1 mu_upper, T..2T-1 mu_lower, 2T..3T-1 rho_upper, 3T..
    std::vector<int> cols;
    std::vector<int> kind(4 * T, -1);
    auto add_col = [&](std::size_t idx) {
      kind[idx] = static_cast<int>(cols.size());
      cols.push_back(static_cast<int>(idx));
    };
    for (std::size_t t = 0; t < T; ++t) {
      const double fl = f[l][t];
      const double prev = t == 0 ? w.polytopes[l].initial_flow : f[l][t - 1];
      if (ln.upper_cap[t] - fl <= cfg.active_tolerance) add_col(t);
      if (fl - ln.lower_cap[t] <= cfg.active_tolerance) add_col(T + t);
      if (std::isfinite(ln.ramp_limit[t])) {
        if (ln.ramp_limit[t] - (fl - prev) <= cfg.active_tolerance) add_col(2 * T + t);
        if (ln.ramp_limit[t] + (fl - prev) <= cfg.active_tolerance) add_col(3 * T + t);
      }
    }
    const int ncol = static_cast<int>(cols.size());
    std::vector<double> A(T * static_cast<std::size_t>(std::max(ncol, 1)), 0.0);
    std::vector<double> rhs(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      rhs[t] = out.price[static_cast<std::size_t>(ln.sink)][t] -
               out.price[static_cast<std::size_t>(ln.source)][t];
      if (ncol == 0) continue;
      auto put = [&](std::size_t var, double v) {
        if (kind[var] >= 0) A[t * static_cast<std::size_t>(ncol) +
                              static_cast<std::size_t>(kind[var])] += v;
      };
      put(t, +1.0);           // mu_upper[t]
      put(T + t, -1.0);       // mu_lower[t]
      put(2 * T + t, +1.0);   // rho_upper[t]
      put(3 * T + t, -1.0);   // rho_lower[t]
      if (t + 1 < T) {
        put(2 * T + t + 1, -1.0);
        put(3 * T + t + 1, +1.0);
      }
    }
    std::vector<double> lam;
    if (ncol > 0) {
      lam = detail::least_squares(A, rhs, static_cast<int>(T), ncol);
      for (double& v : lam) v = std::max(v, 0.0);
      for (int k = 0; k < ncol; ++k) {
        const auto var = static_cast<std::size_t>(cols[static_cast<std::size_t>(k)]);
        const double v = lam[static_cast<std::size_t>(k)];
        if (var < T)
          out.mu_upper[l][var] = v;
        else if (var < 2 * T)
          out.mu_lower[l][var - T] = v;
        else if (var < 3 * T)
          out.rho_upper[l][var - 2 * T] = v;
        else
          out.rho_lower[l][var - 3 * T] = v;
      }
    }
    for (std::size_t t = 0; t < T; ++t) {
      double lhs = out.mu_upper[l][t] - out.mu_lower[l][t] + out.rho_upper[l][t] -
                   out.rho_lower[l][t];
      if (t + 1 < T) lhs += -out.rho_upper[l][t + 1] + out.rho_lower[l][t + 1];
      stationarity = std::max(stationarity, std::abs(lhs - rhs[t]));
    }
  }

  // honest KKT residual: stationarity plus recomputed complementarity
  double comp = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const Line& ln = in.lines[l];
    for (std::size_t t = 0; t < T; ++t) {
      const double prev = t == 0 ? w.polytopes[l].initial_flow : f[l][t - 1];
      comp = std::max(comp, std::abs((ln.upper_cap[t] - f[l][t]) * out.mu_upper[l][t]));
      comp = std::max(comp, std::abs((f[l][t] - ln.lower_cap[t]) * out.mu_lower[l][t]));
      if (std::isfinite(ln.ramp_limit[t])) {
        comp = std::max(comp,
                        std::abs((ln.ramp_limit[t] - (f[l][t] - prev)) * out.rho_upper[l][t]));
        comp = std::max(comp,
                        std::abs((ln.ramp_limit[t] + (f[l][t] - prev)) * out.rho_lower[l][t]));
      }
    }
  }
  sol.kkt_residual = std::max(stationarity, comp);
  return sol;
}

inline QpSolution solve_price_flow(const Instance& in, const AcceptanceVector& acceptance,
                                   const QpConfig& cfg = {}) {
  const CurveSet curves = build_curves(in);
  return solve_price_flow(in, curves, acceptance, cfg);
}

// Literal evaluation of the price-flow condition families (8)-(12).
struct PriceFlowCheck {
  std::array<FamilyCheck, 5> families{};  // (8)..(12)
  bool all_pass() const {
    for (const auto& f : families)
      if (!f.pass) return false;
    return true;
  }
  const FamilyCheck& family(int k) const {
    return families.at(static_cast<std::size_t>(k - 8));
  }
};

inline PriceFlowCheck verify_price_flow(const Instance& in, const QpSolution& sol,
                                        double tolerance = 1e-5) {
  AuditTolerance tol;
  tol.balance = tolerance;
  const AuditReport rep = audit(in, sol.outcome, sol.acceptance, tol);
  PriceFlowCheck out;
  for (int k = 8; k <= 12; ++k) out.families[static_cast<std::size_t>(k - 8)] = rep.family(k);
  return out;
}

}  // namespace zonalclear
