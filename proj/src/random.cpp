#include "sgldc/random.hpp"

#include <cmath>
#include <numbers>

namespace sgldc {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

CounterStream::CounterStream(std::uint64_t seed, std::uint32_t stream_id,
                             StreamPurpose purpose) noexcept
    : seed_(seed), stream_id_(stream_id), lane_(static_cast<std::uint32_t>(purpose)) {}

std::array<double, 2> CounterStream::uniform_pair(std::uint64_t seed, std::uint32_t stream_id,
                                                  std::uint32_t lane,
                                                  std::uint64_t block) noexcept {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block),
                                static_cast<std::uint32_t>(block >> 32), stream_id, lane};
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const auto out = Philox4x32::generate(ctr, key);
  return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
}

std::array<double, 2> CounterStream::normal_pair(std::uint64_t seed, std::uint32_t stream_id,
                                                 std::uint32_t lane,
                                                 std::uint64_t block) noexcept {
  // Normals and uniforms of the same purpose live on disjoint lanes.
  const auto u = uniform_pair(seed, stream_id, lane | 0x80000000u, block);
  const double radius = std::sqrt(-2.0 * std::log(u[0]));
  const double angle = 2.0 * std::numbers::pi * u[1];
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double CounterStream::normal() noexcept {
  const std::uint64_t slot = normal_index_ & 1u;
  if (slot == 0) normal_cache_ = normal_pair(seed_, stream_id_, lane_, normal_index_ >> 1);
  ++normal_index_;
  return normal_cache_[slot];
}

void CounterStream::fill_normal(VectorRef out) noexcept {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal();
}

double CounterStream::uniform() noexcept {
  const std::uint64_t slot = uniform_index_ & 1u;
  if (slot == 0) uniform_cache_ = uniform_pair(seed_, stream_id_, lane_, uniform_index_ >> 1);
  ++uniform_index_;
  return uniform_cache_[slot];
}

std::size_t CounterStream::uniform_index(std::size_t n) noexcept {
  const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return k < n ? k : n - 1;
}

double CounterStream::normal_at(std::uint64_t seed, std::uint32_t stream_id,
                                StreamPurpose purpose, std::uint64_t index) noexcept {
  return normal_pair(seed, stream_id, static_cast<std::uint32_t>(purpose), index >> 1)[index & 1u];
}

}  // namespace sgldc
