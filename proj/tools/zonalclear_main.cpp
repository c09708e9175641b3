// zonalclear CLI: instance generation, solving (ats | exact | heuristic-cut),
// solution checking, and the benchmark harness. Exit codes: 0 feasible,
// 1 check failed, 2 infeasible/refused, 3 budget hit without a solution,
// 64 usage or unreadable input.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "zonalclear/bench.hpp"
#include "zonalclear/driver.hpp"
#include "zonalclear/instgen.hpp"
#include "zonalclear/io.hpp"
#include "zonalclear/oracle.hpp"

namespace fs = std::filesystem;
using namespace zonalclear;

namespace {

constexpr int kExitFeasible = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitBudgetNoSolution = 3;
constexpr int kExitUsage = 64;

struct SolveOptions {
  std::string instance_path;
  std::string method = "ats";
  std::string out_path;
  std::string timing_path;
  std::string config_path;
  std::uint64_t seed = 1;
  double budget_seconds = 600;
  int threads = 0;
};

void apply_config_file(const std::string& path, AtsConfig& ats, OracleLimits& oracle) {
  Json j = Json::parse(read_text_file(path));
  if (j.contains("seed")) ats.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("budget_seconds")) ats.budget_seconds = j.at("budget_seconds").get<double>();
  if (j.contains("outer_cap")) ats.outer_cap = j.at("outer_cap").get<int>();
  if (j.contains("improve_tol")) ats.improve_tol = j.at("improve_tol").get<double>();
  if (j.contains("threads")) ats.threads = j.at("threads").get<int>();
  if (j.contains("ts")) {
    const Json& ts = j.at("ts");
    if (ts.contains("tenure")) ats.ts.tenure = ts.at("tenure").get<int>();
    if (ts.contains("radius_min")) ats.ts.radius_min = ts.at("radius_min").get<int>();
    if (ts.contains("radius_max")) ats.ts.radius_max = ts.at("radius_max").get<int>();
    if (ts.contains("radius_shrink")) ats.ts.radius_shrink = ts.at("radius_shrink").get<int>();
    if (ts.contains("cond1_iterations"))
      ats.ts.cond1_iterations = ts.at("cond1_iterations").get<int>();
    if (ts.contains("max_jumps")) ats.ts.max_jumps = ts.at("max_jumps").get<int>();
  }
  if (j.contains("qp")) {
    const Json& qp = j.at("qp");
    if (qp.contains("step_scale")) ats.qp.step_scale = qp.at("step_scale").get<double>();
    if (qp.contains("max_iterations")) ats.qp.max_iterations = qp.at("max_iterations").get<int>();
    if (qp.contains("pg_tolerance")) ats.qp.pg_tolerance = qp.at("pg_tolerance").get<double>();
  }
  if (j.contains("oracle")) {
    const Json& oj = j.at("oracle");
    if (oj.contains("enumeration_cap"))
      oracle.enumeration_cap = oj.at("enumeration_cap").get<std::uint64_t>();
    if (oj.contains("branch_and_bound"))
      oracle.branch_and_bound = oj.at("branch_and_bound").get<bool>();
  }
  oracle.qp = ats.qp;
}

int cmd_gen(const GenSpec& base, bool grid, int cases, const std::string& out,
            const std::string& out_dir) {
  if (grid) {
    const int zone_opts[] = {2, 4, 8};
    const int alpha_opts[] = {0, 100, 1000};
    int cell = 0;
    for (int z : zone_opts) {
      for (int a : alpha_opts) {
        const std::string set_dir =
            out_dir + "/z" + std::to_string(z) + "_a" + std::to_string(a);
        fs::create_directories(set_dir);
        for (int c = 0; c < cases; ++c) {
          GenSpec spec = base;
          spec.zone_count = z;
          spec.alpha = a;
          spec.seed = derive_seed(base.seed, static_cast<std::uint64_t>(cell),
                                  static_cast<std::uint64_t>(c));
          char name[32];
          std::snprintf(name, sizeof(name), "case_%03d.json", c);
          save_instance(set_dir + "/" + name, generate(spec), spec.seed);
        }
        ++cell;
      }
    }
    std::cout << "wrote " << 9 * cases << " instances under " << out_dir << "\n";
    return kExitFeasible;
  }
  const Instance in = generate(base);
  save_instance(out, in, base.seed);
  std::cout << "wrote " << out << " (zones=" << in.zones << ", segments=" << in.segments.size()
            << ", bids=" << in.bids.size() << ")\n";
  return kExitFeasible;
}

int cmd_solve(const SolveOptions& opt) {
  std::uint64_t gen_seed = 0;
  const Instance in = load_instance(opt.instance_path, &gen_seed);

  AtsConfig ats;
  OracleLimits oracle;
  if (!opt.config_path.empty()) apply_config_file(opt.config_path, ats, oracle);
  ats.seed = opt.seed;
  ats.budget_seconds = opt.budget_seconds;
  ats.threads = opt.threads;
  oracle.deadline = Deadline::after_seconds(opt.budget_seconds);

  ResultFile rf;
  Json timing;
  const auto t0 = Deadline::clock::now();
  bool budget_hit = false;
  if (opt.method == "ats") {
    const AtsResult r = solve_ats(in, ats);
    rf = make_result_file(in, r, ats.seed);
    budget_hit = r.termination == Termination::budget;
    timing["seconds"] = r.seconds;
    Json zs = Json::array();
    for (const auto& tr : r.trace) {
      Json e;
      e["iteration"] = tr.iteration;
      e["seconds"] = tr.seconds;
      e["zone_seconds"] = tr.zone_seconds;
      zs.push_back(std::move(e));
    }
    timing["iterations"] = std::move(zs);
  } else if (opt.method == "exact" || opt.method == "heuristic-cut") {
    try {
      const OracleResult r = opt.method == "exact" ? solve_exact(in, oracle)
                                                   : heuristic_cut_reference(in, oracle);
      rf = make_result_file(in, r, ats.seed);
      budget_hit = r.deadline_hit;
    } catch (const EnumerationCapExceeded& e) {
      std::cerr << "refused: " << e.what() << "\n";
      return kExitInfeasible;
    }
    timing["seconds"] = elapsed_seconds(t0);
  } else {
    std::cerr << "unknown method: " << opt.method << "\n";
    return kExitUsage;
  }

  if (!opt.out_path.empty()) {
    save_result(opt.out_path, rf);
    const std::string tpath =
        opt.timing_path.empty() ? opt.out_path + ".timing.json" : opt.timing_path;
    write_text_file(tpath, timing.dump(2) + "\n");
  }
  std::cout << "method=" << rf.method << " surplus=" << rf.outcome.surplus
            << " feasible=" << (rf.feasible ? "yes" : "no")
            << " termination=" << rf.termination << "\n";
  if (rf.feasible) return kExitFeasible;
  return budget_hit ? kExitBudgetNoSolution : kExitInfeasible;
}

int cmd_check(const std::string& instance_path, const std::string& result_path) {
  Instance in;
  ResultFile rf;
  try {
    in = load_instance(instance_path);
    rf = load_result(result_path);
  } catch (const std::exception& e) {
    std::cout << "check: unreadable input: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    if (!(rf.shape == InstanceShape::of(in))) {
      std::cout << "check: result shape does not match the instance\n";
      return kExitCheckFailed;
    }
    const AcceptanceVector y = acceptance_from_pairs(in, rf.acceptance);
    validate_acceptance(in, y);
    const AuditReport rep = audit(in, rf.outcome, y);
    std::cout << rep.summary();
    const double recomputed = evaluate_surplus(in, rf.outcome.fraction, y);
    const double rel_err = std::abs(recomputed - rf.outcome.surplus) /
                           std::max(1.0, std::abs(recomputed));
    std::cout << "surplus recomputation " << (rel_err <= 1e-9 ? "pass" : "FAIL")
              << " (reported=" << rf.outcome.surplus << ", recomputed=" << recomputed << ")\n";
    const bool ok = rep.all_pass() && rel_err <= 1e-9;
    std::cout << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? kExitFeasible : kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cout << "check: malformed result: " << e.what() << "\nFAIL\n";
    return kExitCheckFailed;
  }
}

std::vector<BenchCase> discover_cases(const std::string& dir) {
  std::vector<BenchCase> cases;
  std::vector<fs::path> sets;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) sets.push_back(e.path());
  std::sort(sets.begin(), sets.end());
  if (sets.empty()) sets.push_back(fs::path(dir));
  for (const auto& set : sets) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(set))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      BenchCase bc;
      bc.set_name = set.filename().string();
      bc.case_name = f.stem().string();
      bc.instance = load_instance(f.string(), &bc.seed);
      cases.push_back(std::move(bc));
    }
  }
  return cases;
}

int cmd_bench(const std::string& dir, const std::string& methods_arg, const std::string& out,
              const std::string& aggregate_out, double budget_seconds, int jobs,
              const std::string& config_path) {
  BenchConfig cfg;
  cfg.methods.clear();
  std::stringstream ss(methods_arg);
  std::string m;
  while (std::getline(ss, m, ','))
    if (!m.empty()) cfg.methods.push_back(m);
  if (cfg.methods.empty()) {
    std::cerr << "bench: no methods given\n";
    return kExitUsage;
  }
  cfg.budget_seconds = budget_seconds;
  cfg.jobs = jobs;
  if (!config_path.empty()) apply_config_file(config_path, cfg.ats, cfg.oracle);

  const auto cases = discover_cases(dir);
  if (cases.empty()) {
    std::cerr << "bench: no instance files under " << dir << "\n";
    return kExitUsage;
  }
  const auto rows = run_bench(cases, cfg);
  write_text_file(out, bench_rows_csv(rows));
  const std::string agg_path = aggregate_out.empty() ? out + ".aggregate.csv" : aggregate_out;
  write_text_file(agg_path, bench_aggregate_csv(rows, cfg.methods));
  std::cout << "wrote " << rows.size() << " rows to " << out << " and aggregates to "
            << agg_path << "\n";
  return kExitFeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zonalclear: multi-zone day-ahead market clearing engine"};
  app.require_subcommand(1);

  // gen
  GenSpec spec;
  bool grid = false;
  int cases = 50;
  std::string gen_out = "instance.json";
  std::string gen_out_dir = "data";
  auto* gen = app.add_subcommand("gen", "generate synthetic instances");
  gen->add_option("--zones", spec.zone_count, "number of zones")->check(CLI::PositiveNumber);
  gen->add_option("--alpha", spec.alpha, "capacity scale, MW (draws are U[0, alpha])")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--scale", spec.scale, "fraction of the published per-day bid counts");
  gen->add_option("--seed", spec.seed, "master seed");
  gen->add_option("--periods", spec.periods, "periods per day")->check(CLI::PositiveNumber);
  gen->add_option("--price-min", spec.price_min, "price floor");
  gen->add_option("--price-max", spec.price_max, "price cap");
  gen->add_option("--bids-per-zone", spec.bids_per_zone, "override non-convex bids per zone");
  gen->add_option("--segments-per-side", spec.segments_per_side,
                  "override curve segments per side per zone-period");
  gen->add_option("--max-starts", spec.max_start_options, "flexible-bid start options cap");
  gen->add_option("--topology", spec.topology, "default | ring | star | double-star");
  gen->add_flag("--grid", grid, "emit the 3x3 (zones x alpha) grid of sets");
  gen->add_option("--cases", cases, "cases per set with --grid");
  gen->add_option("--out", gen_out, "output file (single instance)");
  gen->add_option("--out-dir", gen_out_dir, "output directory (--grid)");

  // solve
  SolveOptions sopt;
  auto* solve = app.add_subcommand("solve", "solve an instance");
  solve->add_option("instance", sopt.instance_path, "instance file")->required();
  solve->add_option("--method", sopt.method, "ats | exact | heuristic-cut");
  solve->add_option("--seed", sopt.seed, "solver seed (ats)");
  solve->add_option("--budget-seconds", sopt.budget_seconds, "hard announcement deadline");
  solve->add_option("--config", sopt.config_path, "JSON config file");
  solve->add_option("--threads", sopt.threads, "zonal search workers (0 = auto)");
  solve->add_option("--out", sopt.out_path, "result file");
  solve->add_option("--timing-out", sopt.timing_path,
                    "wall-clock sidecar (default: <out>.timing.json)");

  // check
  std::string chk_instance, chk_result;
  auto* check = app.add_subcommand("check", "audit a result file against its instance");
  check->add_option("instance", chk_instance, "instance file")->required();
  check->add_option("result", chk_result, "result file")->required();

  // bench
  std::string bench_dir, bench_methods = "ats,exact", bench_out = "results.csv";
  std::string bench_aggregate, bench_config;
  double bench_budget = 600;
  int bench_jobs = 0;
  auto* bench = app.add_subcommand("bench", "run methods over a case directory");
  bench->add_option("--dir", bench_dir, "directory of sets/cases")->required();
  bench->add_option("--methods", bench_methods, "comma-separated methods");
  bench->add_option("--out", bench_out, "per-case CSV");
  bench->add_option("--aggregate-out", bench_aggregate, "aggregate CSV");
  bench->add_option("--budget-seconds", bench_budget, "per-method budget");
  bench->add_option("--jobs", bench_jobs, "parallel cases (0 = auto)");
  bench->add_option("--config", bench_config, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(spec, grid, cases, gen_out, gen_out_dir);
    if (solve->parsed()) return cmd_solve(sopt);
    if (check->parsed()) return cmd_check(chk_instance, chk_result);
    if (bench->parsed())
      return cmd_bench(bench_dir, bench_methods, bench_out, bench_aggregate, bench_budget,
                       bench_jobs, bench_config);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  }
  return kExitUsage;
}
