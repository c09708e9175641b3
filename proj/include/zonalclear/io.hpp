#pragma once

// File formats: JSON instance and result files (schema in docs/format.md)
// and the benchmark CSVs. Field names carry units and sign conventions;
// every file records the seed that produced it. Result files hold no wall
// -clock data, so re-runs with the same seed are byte-identical.

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "zonalclear/driver.hpp"
#include "zonalclear/model.hpp"
#include "zonalclear/oracle.hpp"

namespace zonalclear {

using Json = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kInstanceFormat = "zonalclear-instance-v1";
inline constexpr const char* kResultFormat = "zonalclear-result-v1";

namespace detail {

inline Json finite_array(const std::vector<double>& v) {
  // nlohmann serializes non-finite values as null; parse restores +inf,
  // which only ramp limits use.
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline std::vector<double> number_array(const Json& a, const char* what,
                                        double null_value = kInf) {
  if (!a.is_array()) throw ParseError(std::string(what) + ": expected an array");
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) {
    if (x.is_null())
      v.push_back(null_value);
    else if (x.is_number())
      v.push_back(x.get<double>());
    else
      throw ParseError(std::string(what) + ": expected numbers or null");
  }
  return v;
}

template <typename T>
T require(const Json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field ") + key + ": " + e.what());
  }
}

}  // namespace detail

inline Json instance_to_json(const Instance& in, std::uint64_t seed) {
  Json j;
  j["format"] = kInstanceFormat;
  j["seed"] = seed;
  j["periods"] = in.periods;
  j["zones"] = in.zones;
  j["price_min_per_mwh"] = in.price_min;
  j["price_max_per_mwh"] = in.price_max;
  j["lines"] = Json::array();
  for (std::size_t l = 0; l < in.lines.size(); ++l) {
    const Line& ln = in.lines[l];
    Json e;
    e["id"] = ln.id;
    e["source_zone"] = ln.source;
    e["sink_zone"] = ln.sink;
    e["upper_cap_mw"] = detail::finite_array(ln.upper_cap);
    e["lower_cap_mw"] = detail::finite_array(ln.lower_cap);
    e["ramp_limit_mw"] = detail::finite_array(ln.ramp_limit);
    e["initial_flow_mw"] = in.initial_flow[l];
    j["lines"].push_back(std::move(e));
  }
  j["segments"] = Json::array();
  for (const Segment& s : in.segments) {
    Json e;
    e["zone"] = s.zone;
    e["period"] = s.period;
    e["kind"] = s.kind == SegmentKind::supply ? "supply" : "demand";
    e["price_start_per_mwh"] = s.price_start;
    e["price_end_per_mwh"] = s.price_end;
    e["volume_mwh_signed"] = s.volume;
    j["segments"].push_back(std::move(e));
  }
  j["bids"] = Json::array();
  for (const NonConvexBid& b : in.bids) {
    Json e;
    e["id"] = b.id;
    e["zone"] = b.zone;
    e["price_per_mwh"] = b.price;
    e["starts"] = Json::array();
    for (const BidOption& o : b.options) {
      Json se;
      se["start_period"] = o.start;
      se["volumes_mwh_signed"] = detail::finite_array(o.volumes);
      e["starts"].push_back(std::move(se));
    }
    if (b.mother)
      e["mother"] = *b.mother;
    else
      e["mother"] = nullptr;
    j["bids"].push_back(std::move(e));
  }
  return j;
}

inline Instance instance_from_json(const Json& j, std::uint64_t* seed_out = nullptr) {
  if (detail::require<std::string>(j, "format") != kInstanceFormat)
    throw ParseError("not a zonalclear instance file");
  if (seed_out != nullptr) *seed_out = detail::require<std::uint64_t>(j, "seed");
  Instance in;
  in.periods = detail::require<int>(j, "periods");
  in.zones = detail::require<int>(j, "zones");
  in.price_min = detail::require<double>(j, "price_min_per_mwh");
  in.price_max = detail::require<double>(j, "price_max_per_mwh");
  if (j.contains("lines")) {
    for (const auto& e : j.at("lines")) {
      Line ln;
      ln.id = detail::require<std::string>(e, "id");
      ln.source = detail::require<ZoneId>(e, "source_zone");
      ln.sink = detail::require<ZoneId>(e, "sink_zone");
      ln.upper_cap = detail::number_array(e.at("upper_cap_mw"), "upper_cap_mw");
      ln.lower_cap = detail::number_array(e.at("lower_cap_mw"), "lower_cap_mw", -kInf);
      ln.ramp_limit = detail::number_array(e.at("ramp_limit_mw"), "ramp_limit_mw");
      in.initial_flow.push_back(detail::require<double>(e, "initial_flow_mw"));
      in.lines.push_back(std::move(ln));
    }
  }
  if (j.contains("segments")) {
    for (const auto& e : j.at("segments")) {
      Segment s;
      s.zone = detail::require<ZoneId>(e, "zone");
      s.period = detail::require<Period>(e, "period");
      const auto kind = detail::require<std::string>(e, "kind");
      if (kind != "supply" && kind != "demand") throw ParseError("segment kind must be supply|demand");
      s.kind = kind == "supply" ? SegmentKind::supply : SegmentKind::demand;
      s.price_start = detail::require<double>(e, "price_start_per_mwh");
      s.price_end = detail::require<double>(e, "price_end_per_mwh");
      s.volume = detail::require<double>(e, "volume_mwh_signed");
      in.segments.push_back(s);
    }
  }
  if (j.contains("bids")) {
    for (const auto& e : j.at("bids")) {
      NonConvexBid b;
      b.id = detail::require<std::string>(e, "id");
      b.zone = detail::require<ZoneId>(e, "zone");
      b.price = detail::require<double>(e, "price_per_mwh");
      for (const auto& se : e.at("starts")) {
        BidOption o;
        o.start = detail::require<Period>(se, "start_period");
        o.volumes = detail::number_array(se.at("volumes_mwh_signed"), "volumes_mwh_signed", 0.0);
        b.options.push_back(std::move(o));
      }
      if (e.contains("mother") && !e.at("mother").is_null())
        b.mother = e.at("mother").get<std::string>();
      in.bids.push_back(std::move(b));
    }
  }
  validate(in);
  return in;
}

// Solver output file. Wall-clock timings are deliberately excluded; the CLI
// writes them to a separate sidecar so result files are reproducible.
struct ResultFile {
  std::string method;
  std::uint64_t seed = 0;
  bool feasible = false;
  InstanceShape shape;
  ClearingOutcome outcome;
  std::vector<std::pair<std::string, std::optional<Period>>> acceptance;  // by bid id
  double kkt_residual = 0;
  std::string termination;
  double pre_repair_surplus = 0;
  double post_repair_surplus = 0;
  std::vector<OuterIterationTrace> trace;
  bool audit_pass = false;
};

inline Json result_to_json(const ResultFile& r) {
  Json j;
  j["format"] = kResultFormat;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["feasible"] = r.feasible;
  j["instance_shape"] = {{"zones", r.shape.zones},
                         {"periods", r.shape.periods},
                         {"lines", r.shape.lines},
                         {"segments", r.shape.segments},
                         {"bids", r.shape.bids}};
  j["surplus_money"] = r.outcome.surplus;
  j["prices_per_mwh"] = r.outcome.price;
  j["fractions"] = r.outcome.fraction;
  j["flows_mw"] = r.outcome.flow;
  j["duals"] = {{"mu_upper", r.outcome.mu_upper},
                {"mu_lower", r.outcome.mu_lower},
                {"rho_upper", r.outcome.rho_upper},
                {"rho_lower", r.outcome.rho_lower}};
  j["acceptance"] = Json::array();
  for (const auto& [id, start] : r.acceptance) {
    Json e;
    e["bid"] = id;
    if (start)
      e["start_period"] = *start;
    else
      e["start_period"] = nullptr;
    j["acceptance"].push_back(std::move(e));
  }
  j["kkt_residual"] = r.kkt_residual;
  j["termination"] = r.termination;
  j["pre_repair_surplus"] = r.pre_repair_surplus;
  j["post_repair_surplus"] = r.post_repair_surplus;
  j["trace"] = Json::array();
  for (const auto& tr : r.trace) {
    Json e;
    e["iteration"] = tr.iteration;
    e["ts_surplus"] = tr.ts_surplus;
    e["qp_surplus"] = tr.qp_surplus;
    e["qp_residual"] = tr.qp_residual;
    e["accepted"] = tr.accepted;
    j["trace"].push_back(std::move(e));
  }
  j["audit_pass"] = r.audit_pass;
  return j;
}

inline ResultFile result_from_json(const Json& j) {
  if (detail::require<std::string>(j, "format") != kResultFormat)
    throw ParseError("not a zonalclear result file");
  ResultFile r;
  r.method = detail::require<std::string>(j, "method");
  r.seed = detail::require<std::uint64_t>(j, "seed");
  r.feasible = detail::require<bool>(j, "feasible");
  const Json& sh = j.at("instance_shape");
  r.shape.zones = detail::require<int>(sh, "zones");
  r.shape.periods = detail::require<int>(sh, "periods");
  r.shape.lines = detail::require<int>(sh, "lines");
  r.shape.segments = detail::require<int>(sh, "segments");
  r.shape.bids = detail::require<int>(sh, "bids");
  try {
    r.outcome.surplus = detail::require<double>(j, "surplus_money");
    r.outcome.price = j.at("prices_per_mwh").get<std::vector<std::vector<double>>>();
    r.outcome.fraction = detail::number_array(j.at("fractions"), "fractions", 0.0);
    r.outcome.flow = j.at("flows_mw").get<std::vector<std::vector<double>>>();
    const Json& d = j.at("duals");
    r.outcome.mu_upper = d.at("mu_upper").get<std::vector<std::vector<double>>>();
    r.outcome.mu_lower = d.at("mu_lower").get<std::vector<std::vector<double>>>();
    r.outcome.rho_upper = d.at("rho_upper").get<std::vector<std::vector<double>>>();
    r.outcome.rho_lower = d.at("rho_lower").get<std::vector<std::vector<double>>>();
    for (const auto& e : j.at("acceptance")) {
      std::optional<Period> start;
      if (!e.at("start_period").is_null()) start = e.at("start_period").get<Period>();
      r.acceptance.emplace_back(detail::require<std::string>(e, "bid"), start);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed result payload: ") + e.what());
  }
  r.kkt_residual = detail::require<double>(j, "kkt_residual");
  r.termination = detail::require<std::string>(j, "termination");
  r.pre_repair_surplus = j.value("pre_repair_surplus", 0.0);
  r.post_repair_surplus = j.value("post_repair_surplus", 0.0);
  r.audit_pass = detail::require<bool>(j, "audit_pass");
  return r;
}

inline std::vector<std::pair<std::string, std::optional<Period>>> acceptance_by_id(
    const Instance& in, const AcceptanceVector& y) {
  std::vector<std::pair<std::string, std::optional<Period>>> out;
  out.reserve(in.bids.size());
  for (std::size_t b = 0; b < in.bids.size(); ++b)
    out.emplace_back(in.bids[b].id, y.start[b]);
  return out;
}

// Rebuild an AcceptanceVector from id-keyed pairs; throws on unknown ids.
inline AcceptanceVector acceptance_from_pairs(
    const Instance& in,
    const std::vector<std::pair<std::string, std::optional<Period>>>& pairs) {
  AcceptanceVector y = AcceptanceVector::all_rejected(in);
  for (const auto& [id, start] : pairs) {
    const int b = in.bid_index(id);
    if (b < 0) throw ParseError("result references unknown bid id " + id);
    y.start[static_cast<std::size_t>(b)] = start;
  }
  return y;
}

inline ResultFile make_result_file(const Instance& in, const AtsResult& r,
                                   std::uint64_t seed) {
  ResultFile f;
  f.method = "ats";
  f.seed = seed;
  f.feasible = r.feasible;
  f.shape = r.shape;
  f.outcome = r.outcome;
  f.acceptance = acceptance_by_id(in, r.acceptance);
  f.kkt_residual = 0;
  f.termination = to_string(r.termination);
  f.pre_repair_surplus = r.pre_repair_surplus;
  f.post_repair_surplus = r.post_repair_surplus;
  f.trace = r.trace;
  f.audit_pass = r.audit.all_pass();
  return f;
}

inline ResultFile make_result_file(const Instance& in, const OracleResult& r,
                                   const std::string& method, std::uint64_t seed) {
  ResultFile f;
  f.method = method;
  f.seed = seed;
  f.feasible = r.feasible;
  f.shape = r.shape;
  f.outcome = r.outcome;
  f.acceptance = acceptance_by_id(in, r.acceptance);
  f.kkt_residual = 0;
  f.termination = r.deadline_hit ? "budget" : "converged";
  f.audit_pass = r.audit.all_pass();
  return f;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("short write to " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_instance(const std::string& path, const Instance& in, std::uint64_t seed) {
  write_text_file(path, instance_to_json(in, seed).dump(2) + "\n");
}

inline Instance load_instance(const std::string& path, std::uint64_t* seed_out = nullptr) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return instance_from_json(j, seed_out);
}

inline void save_result(const std::string& path, const ResultFile& r) {
  write_text_file(path, result_to_json(r).dump(2) + "\n");
}

inline ResultFile load_result(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return result_from_json(j);
}

// Fixed-precision CSV cell so files are stable across runs.
inline std::string csv_number(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace zonalclear
