#pragma once

// Shared builders for the test suites.

#include <optional>
#include <string>
#include <vector>

#include "zonalclear/instgen.hpp"
#include "zonalclear/model.hpp"

namespace zonalclear::testing {

inline Segment supply_seg(ZoneId zone, Period t, double p0, double p1, double volume_abs) {
  Segment s;
  s.zone = zone;
  s.period = t;
  s.kind = SegmentKind::supply;
  s.price_start = p0;
  s.price_end = p1;
  s.volume = -volume_abs;
  return s;
}

inline Segment demand_seg(ZoneId zone, Period t, double p0, double p1, double volume_abs) {
  Segment s;
  s.zone = zone;
  s.period = t;
  s.kind = SegmentKind::demand;
  s.price_start = p0;
  s.price_end = p1;
  s.volume = volume_abs;
  return s;
}

inline NonConvexBid simple_bid(const std::string& id, ZoneId zone, double price, Period start,
                               std::vector<double> volumes,
                               std::optional<std::string> mother = std::nullopt) {
  NonConvexBid b;
  b.id = id;
  b.zone = zone;
  b.price = price;
  BidOption o;
  o.start = start;
  o.volumes = std::move(volumes);
  b.options.push_back(std::move(o));
  b.mother = std::move(mother);
  return b;
}

inline Instance empty_instance(int zones = 1, int periods = 1, double pmin = 0,
                               double pmax = 100) {
  Instance in;
  in.zones = zones;
  in.periods = periods;
  in.price_min = pmin;
  in.price_max = pmax;
  return in;
}

// The symmetric crossing: supply [0,10] volume 100, demand [10,0] volume 100.
inline Instance crossing_instance() {
  Instance in = empty_instance(1, 1, 0, 10);
  in.segments.push_back(supply_seg(0, 0, 0, 10, 100));
  in.segments.push_back(demand_seg(0, 0, 10, 0, 100));
  return in;
}

inline Line make_line(const std::string& id, ZoneId src, ZoneId dst, int periods, double cap,
                      double ramp = kInf) {
  Line ln;
  ln.id = id;
  ln.source = src;
  ln.sink = dst;
  ln.upper_cap.assign(static_cast<std::size_t>(periods), cap);
  ln.lower_cap.assign(static_cast<std::size_t>(periods), -cap);
  ln.ramp_limit.assign(static_cast<std::size_t>(periods), ramp);
  return ln;
}

// Small random instance for sweeps: modest volumes and prices keep grid
// oracles tight.
inline GenSpec small_spec(std::uint64_t seed, int zones = 2, int periods = 4,
                          double alpha = 50, int bids_per_zone = 2) {
  GenSpec spec;
  spec.zone_count = zones;
  spec.periods = periods;
  spec.alpha = alpha;
  spec.seed = seed;
  spec.price_min = 0;
  spec.price_max = 100;
  spec.bids_per_zone = bids_per_zone;
  spec.segments_per_side = 2;
  spec.max_start_options = 3;
  spec.segment_volume_min = 40;
  spec.segment_volume_max = 200;
  spec.bid_volume_min = 4;
  spec.bid_volume_max = 25;
  return spec;
}

}  // namespace zonalclear::testing
