#pragma once

#include "sgldc/types.hpp"

#include <array>
#include <cstdint>

namespace sgldc {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

// Independent sub-streams per trajectory. Draws for different purposes never
// collide, so turning on an optional diagnostic cannot perturb the noise a
// chain sees.
enum class StreamPurpose : std::uint32_t {
  brownian = 0,
  batch = 1,
  initial = 2,
  bridge = 3,
  reference = 4,
  diagnostic = 5,
  initial_partner = 6,
};

// A reproducible random stream addressed by (seed, stream_id, purpose, index).
// The i-th normal (or uniform) of a stream is a pure function of those four
// values, which lets ensembles run in any order or thread layout.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t stream_id,
                StreamPurpose purpose = StreamPurpose::brownian) noexcept;

  double normal() noexcept;
  void fill_normal(VectorRef out) noexcept;

  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  // Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) noexcept;

  std::uint64_t normals_drawn() const noexcept { return normal_index_; }
  std::uint64_t uniforms_drawn() const noexcept { return uniform_index_; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint32_t stream_id() const noexcept { return stream_id_; }

  // Random access to the index-th normal, independent of stream state.
  static double normal_at(std::uint64_t seed, std::uint32_t stream_id,
                          StreamPurpose purpose, std::uint64_t index) noexcept;

 private:
  static std::array<double, 2> uniform_pair(std::uint64_t seed, std::uint32_t stream_id,
                                            std::uint32_t lane, std::uint64_t block) noexcept;
  static std::array<double, 2> normal_pair(std::uint64_t seed, std::uint32_t stream_id,
                                           std::uint32_t lane, std::uint64_t block) noexcept;

  std::uint64_t seed_;
  std::uint32_t stream_id_;
  std::uint32_t lane_;
  std::uint64_t normal_index_ = 0;
  std::uint64_t uniform_index_ = 0;
  std::array<double, 2> normal_cache_{};
  std::array<double, 2> uniform_cache_{};
};

}  // namespace sgldc
