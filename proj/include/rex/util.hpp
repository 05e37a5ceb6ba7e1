#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rex {

/// Deterministic random stream. All draws go through explicit bit
/// mappings so results are identical across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (pair cached).
  double next_gaussian();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[next_below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a 64-bit hash, used for vocabulary fingerprints.
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t fnv1a64(std::uint64_t h, std::string_view text);

/// Expands one master seed into independent per-phase streams.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// Runs fn(0..n-1). With threads > 1 the index range is split into
/// contiguous blocks; callers must write results by index so the output
/// does not depend on the schedule.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

enum class LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Current verbosity, read once from REX_LOG (error|warn|info|debug).
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& m) { log_message(LogLevel::kError, m); }
inline void log_warn(const std::string& m) { log_message(LogLevel::kWarn, m); }
inline void log_info(const std::string& m) { log_message(LogLevel::kInfo, m); }
inline void log_debug(const std::string& m) { log_message(LogLevel::kDebug, m); }

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view line, char sep);

}  // namespace rex
