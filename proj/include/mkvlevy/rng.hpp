#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>

namespace mkvlevy {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: same (counter, key) gives same output.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer; used to fold structured stream identifiers into a 64-bit stream id.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based generator. The key is the master seed, the upper half of the counter is the
/// stream id and the lower half counts blocks, so every (seed, stream) pair is an independent
/// sequence that does not depend on which worker draws it or in what order streams are used.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t stream) noexcept;

  /// Stream id derived from a path of tags, e.g. stream(seed, {kParticles, i}).
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t tag) const noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  double exponential() noexcept;
  /// Gamma(shape, scale=1); valid for any shape > 0 (Marsaglia-Tsang with the shape<1 boost).
  double gamma(double shape) noexcept;
  /// log of a Gamma(shape, 1) variate; stays finite for tiny shapes where the variate underflows.
  double log_gamma_variate(double shape) noexcept;
  std::uint64_t poisson(double mean);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  std::optional<double> spare_normal_;
};

/// Well-known stream tags so that unrelated consumers never share a stream.
namespace tags {
inline constexpr std::uint64_t kParticle = 0x5041525449434c45ULL;
inline constexpr std::uint64_t kSubordinator = 0x5355424f52440000ULL;
inline constexpr std::uint64_t kBrownian = 0x42524f574e000000ULL;
inline constexpr std::uint64_t kJumps = 0x4a554d5053000000ULL;
inline constexpr std::uint64_t kPath = 0x5041544800000000ULL;
inline constexpr std::uint64_t kBootstrap = 0x424f4f5400000000ULL;
inline constexpr std::uint64_t kSubsample = 0x5355425300000000ULL;
inline constexpr std::uint64_t kInitial = 0x494e495400000000ULL;
inline constexpr std::uint64_t kCoupling = 0x434f55504c000000ULL;
inline constexpr std::uint64_t kCost = 0x434f535400000000ULL;
}  // namespace tags

}  // namespace mkvlevy
