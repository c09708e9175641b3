#pragma once

// Benchmark harness: run solvers case by case, collect per-case rows and the
// per-set aggregate table (mean surplus difference and mean run times).
// Cases run in parallel but each case runs single-threaded so the recorded
// times stay honest.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "zonalclear/common.hpp"
#include "zonalclear/driver.hpp"
#include "zonalclear/io.hpp"
#include "zonalclear/oracle.hpp"
#include "zonalclear/threadpool.hpp"

namespace zonalclear {

struct BenchCase {
  std::string set_name;
  std::string case_name;
  Instance instance;
  std::uint64_t seed = 1;
};

struct BenchRow {
  std::string set_name;
  std::string case_name;
  std::string method;
  double surplus = 0;
  double seconds = 0;
  bool feasible = false;
  bool audit_pass = false;
};

struct BenchConfig {
  std::vector<std::string> methods = {"ats", "exact"};
  double budget_seconds = 600;
  int jobs = 0;  // parallelism across cases; 0 -> auto
  AtsConfig ats{};
  OracleLimits oracle{};
};

inline BenchRow run_bench_method(const BenchCase& bc, const std::string& method,
                                 const BenchConfig& cfg) {
  BenchRow row;
  row.set_name = bc.set_name;
  row.case_name = bc.case_name;
  row.method = method;
  const auto t0 = Deadline::clock::now();
  try {
    if (method == "ats") {
      AtsConfig ats = cfg.ats;
      ats.seed = bc.seed;
      ats.budget_seconds = cfg.budget_seconds;
      ats.threads = 1;  // timing honesty: no parallelism inside a case
      const AtsResult r = solve_ats(bc.instance, ats);
      row.surplus = r.outcome.surplus;
      row.feasible = r.feasible;
      row.audit_pass = r.audit.all_pass();
    } else if (method == "exact" || method == "heuristic-cut") {
      OracleLimits lim = cfg.oracle;
      lim.deadline = Deadline::after_seconds(cfg.budget_seconds);
      const OracleResult r = method == "exact" ? solve_exact(bc.instance, lim)
                                               : heuristic_cut_reference(bc.instance, lim);
      row.surplus = r.outcome.surplus;
      row.feasible = r.feasible;
      row.audit_pass = r.audit.all_pass();
    } else {
      throw std::invalid_argument("unknown method " + method);
    }
  } catch (const EnumerationCapExceeded&) {
    row.feasible = false;
  }
  row.seconds = elapsed_seconds(t0);
  return row;
}

inline std::vector<BenchRow> run_bench(const std::vector<BenchCase>& cases,
                                       const BenchConfig& cfg) {
  std::vector<BenchRow> rows(cases.size() * cfg.methods.size());
  const int jobs = resolve_threads(cfg.jobs);
  parallel_for(static_cast<int>(cases.size()), jobs, [&](int i) {
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
      rows[static_cast<std::size_t>(i) * cfg.methods.size() + m] =
          run_bench_method(cases[static_cast<std::size_t>(i)], cfg.methods[m], cfg);
  });
  return rows;
}

inline std::string bench_rows_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "set,case,method,surplus,seconds,feasible,audit_pass\n";
  for (const BenchRow& r : rows) {
    out << r.set_name << ',' << r.case_name << ',' << r.method << ','
        << csv_number(r.surplus) << ',' << csv_number(r.seconds, 3) << ','
        << (r.feasible ? 1 : 0) << ',' << (r.audit_pass ? 1 : 0) << '\n';
  }
  return out.str();
}

// Parses "z<zones>_a<alpha>" set names; other names yield (-1, -1).
inline std::pair<int, int> parse_set_name(const std::string& set_name) {
  int zones = -1, alpha = -1;
  if (std::sscanf(set_name.c_str(), "z%d_a%d", &zones, &alpha) == 2) return {zones, alpha};
  return {-1, -1};
}

// Aggregate keyed by set: mean surplus difference between the first two
// methods (cases where both produced a solution) and mean seconds per method.
inline std::string bench_aggregate_csv(const std::vector<BenchRow>& rows,
                                       const std::vector<std::string>& methods) {
  struct Agg {
    std::map<std::string, std::pair<double, int>> seconds;  // method -> (sum, n)
    double diff_sum = 0;
    int diff_n = 0;
    int cases = 0;
  };
  std::map<std::string, Agg> by_set;
  std::map<std::pair<std::string, std::string>, const BenchRow*> index;
  for (const BenchRow& r : rows) index[{r.set_name + "/" + r.case_name, r.method}] = &r;

  for (const BenchRow& r : rows) {
    Agg& a = by_set[r.set_name];
    auto& s = a.seconds[r.method];
    s.first += r.seconds;
    s.second += 1;
  }
  if (methods.size() >= 2) {
    std::map<std::string, std::vector<std::string>> cases_of_set;
    for (const BenchRow& r : rows)
      if (r.method == methods[0]) cases_of_set[r.set_name].push_back(r.case_name);
    for (auto& [set_name, case_list] : cases_of_set) {
      Agg& a = by_set[set_name];
      a.cases = static_cast<int>(case_list.size());
      for (const auto& c : case_list) {
        const auto ra = index.find({set_name + "/" + c, methods[0]});
        const auto rb = index.find({set_name + "/" + c, methods[1]});
        if (ra == index.end() || rb == index.end()) continue;
        if (!ra->second->feasible || !rb->second->feasible) continue;
        a.diff_sum += ra->second->surplus - rb->second->surplus;
        a.diff_n += 1;
      }
    }
  } else {
    for (const BenchRow& r : rows)
      if (r.method == methods[0]) by_set[r.set_name].cases += 1;
  }

  std::ostringstream out;
  out << "set,zones,alpha,cases,mean_surplus_diff";
  for (const auto& m : methods) out << ",mean_seconds_" << m;
  out << '\n';
  for (const auto& [set_name, a] : by_set) {
    const auto [zones, alpha] = parse_set_name(set_name);
    out << set_name << ',' << zones << ',' << alpha << ',' << a.cases << ',';
    out << (a.diff_n > 0 ? csv_number(a.diff_sum / a.diff_n) : std::string("nan"));
    for (const auto& m : methods) {
      const auto it = a.seconds.find(m);
      out << ','
          << (it != a.seconds.end() && it->second.second > 0
                  ? csv_number(it->second.first / it->second.second, 3)
                  : std::string("nan"));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace zonalclear
