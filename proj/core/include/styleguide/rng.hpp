#pragma once

#include <cstdint>

namespace styleguide {

// Counter-based random stream. Draw k of stream (seed, stream_id) is a pure
// function of those three integers, so results never depend on the order in
// which independent streams are consumed.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t position() const noexcept { return counter_; }

  // Raw 64-bit value at an absolute counter position, without advancing.
  std::uint64_t at(std::uint64_t index) const noexcept;

  std::uint64_t next_u64() noexcept { return at(counter_++); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  // Uniform on (0, 1].
  double uniform_open_low() noexcept;

  // Standard normal (Marsaglia polar method; pairs are generated together and
  // the second value is returned by the next call).
  double normal() noexcept;

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  // Child stream with an id derived from this stream's id and `tag`.
  // Children with different tags are independent of each other and of the parent.
  RngStream derive(std::uint64_t tag) const noexcept;

  RngStream derive(std::uint64_t tag_a, std::uint64_t tag_b) const noexcept { return derive(tag_a).derive(tag_b); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t stream_key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags used across the library, so two subsystems never share a stream by accident.
namespace stream_tag {
inline constexpr std::uint64_t kChainInit = 0x1001;
inline constexpr std::uint64_t kChainStep = 0x1002;
inline constexpr std::uint64_t kMixing = 0x2001;
inline constexpr std::uint64_t kTraining = 0x3001;
inline constexpr std::uint64_t kData = 0x4001;
inline constexpr std::uint64_t kTemplate = 0x5001;
inline constexpr std::uint64_t kNoiseProbe = 0x6001;
}  // namespace stream_tag

}  // namespace styleguide
