#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emorf {

/// Malformed or inconsistent input data (CLI exit code 2).
class input_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerically undefined result (all-zero spectrum, constant vector, ...).
class degenerate_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SplitMix64 step; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Small portable PRNG (xoshiro256**). Unlike the standard distributions,
/// the helper methods here produce identical sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform integer in [0, bound), bound > 0. Lemire's method with rejection.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double uniform();
  /// Standard normal (Box-Muller, no cached second value).
  double normal();

 private:
  std::uint64_t s_[4];
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written to per-index slots so that the schedule cannot affect output.
/// workers == 0 means hardware concurrency.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

unsigned resolve_workers(unsigned requested);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

}  // namespace emorf
