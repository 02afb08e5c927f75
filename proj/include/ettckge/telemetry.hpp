#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#if defined(__unix__) || defined(__APPLE__)
#include <sys/resource.h>
#endif

namespace ettckge {

// Process resident-set high-water mark, in bytes. 0 if unavailable.
inline std::uint64_t peak_rss_bytes() {
#if defined(__unix__) || defined(__APPLE__)
  struct rusage ru{};
  if (getrusage(RUSAGE_SELF, &ru) != 0) return 0;
#if defined(__APPLE__)
  return std::uint64_t(ru.ru_maxrss);
#else
  return std::uint64_t(ru.ru_maxrss) * 1024;  // linux reports KiB
#endif
#else
  return 0;
#endif
}

class StopWatch {
 public:
  StopWatch() : start_(clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

// Per-snapshot efficiency metrics. Training time excludes dataset load and
// evaluation; eval time is reported separately.
struct SnapshotMetrics {
  std::size_t snapshot = 0;
  double stage1_s = 0;
  double stage2_s = 0;
  double wall_time_s = 0;       // stage1 + stage2
  double cumulative_time_s = 0;
  double eval_time_s = 0;
  std::uint64_t peak_memory_bytes = 0;        // RSS high-water mark
  std::uint64_t live_table_bytes = 0;         // bytes held by model tensors
  std::uint64_t stage1_updated_parameters = 0;  // token coordinates, 2*T*D
  std::uint64_t stage2_updated_parameters = 0;  // embedding coords touched by a gradient
};

// Tracks which rows of a table ever received a nonzero gradient.
class TouchTracker {
 public:
  explicit TouchTracker(std::size_t rows) : touched_(rows, false) {}

  template <typename M>
  void observe(const M& grad) {
    for (std::size_t r = 0; r < grad.rows() && r < touched_.size(); ++r) {
      if (touched_[r]) continue;
      auto row = grad.row(r);
      for (auto v : row) {
        if (v != 0) {
          touched_[r] = true;
          break;
        }
      }
    }
  }

  std::size_t touched_rows() const {
    std::size_t n = 0;
    for (bool b : touched_) n += b;
    return n;
  }

 private:
  std::vector<bool> touched_;
};

}  // namespace ettckge
