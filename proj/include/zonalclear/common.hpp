#pragma once

#include <chrono>
#include <cmath>
#include <limits>

namespace zonalclear {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Wall-clock cutoff passed down through long-running solvers. A
// default-constructed deadline never expires.
class Deadline {
 public:
  using clock = std::chrono::steady_clock;

  Deadline() = default;
  static Deadline after_seconds(double s) {
    Deadline d;
    d.armed_ = true;
    d.when_ = clock::now() + std::chrono::duration_cast<clock::duration>(
                                 std::chrono::duration<double>(s));
    return d;
  }
  static Deadline at(clock::time_point tp) {
    Deadline d;
    d.armed_ = true;
    d.when_ = tp;
    return d;
  }

  bool expired() const { return armed_ && clock::now() >= when_; }
  bool armed() const { return armed_; }
  double remaining_seconds() const {
    if (!armed_) return kInf;
    return std::chrono::duration<double>(when_ - clock::now()).count();
  }
  clock::time_point when() const { return when_; }

 private:
  bool armed_ = false;
  clock::time_point when_{};
};

inline double elapsed_seconds(Deadline::clock::time_point since) {
  return std::chrono::duration<double>(Deadline::clock::now() - since).count();
}

}  // namespace zonalclear
