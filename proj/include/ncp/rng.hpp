#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ncp {

/// Philox4x32-10 block function (Salmon et al., SC'11). Maps a 128-bit
/// counter and a 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// A seedable, splittable random stream backed by Philox.
///
/// The stream is identified by (seed, stream id); successive draws walk the
/// low 64 bits of the counter. `split(i)` derives an independent child whose
/// identity depends only on the parent identity and `i`, never on how many
/// values the parent has already produced. That makes per-sample and
/// per-iteration streams a pure function of the master seed.
class Stream {
 public:
  explicit Stream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  Stream split(std::uint64_t index) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in (0, 1).
  double uniform_open();
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Index drawn with probability proportional to `weights` (nonnegative,
  /// not all zero).
  std::size_t categorical(std::span<const double> weights);
  /// Uniformly random permutation of 0..n-1 (Fisher-Yates).
  std::vector<int> permutation(int n);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// SplitMix64 finalizer, used for deriving child stream ids.
std::uint64_t mix64(std::uint64_t x);

}  // namespace ncp
