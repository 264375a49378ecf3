#include "sgldc/random.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace sgldc;

TEST_CASE("philox known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and randomly addressable") {
  CounterStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x == CounterStream::normal_at(42, 7, StreamPurpose::brownian, static_cast<std::uint64_t>(i)));
  }
  CHECK(a.normals_drawn() == 100);
}

TEST_CASE("purposes, stream ids and seeds give distinct sequences") {
  CounterStream base(1, 0), other_purpose(1, 0, StreamPurpose::batch), other_id(1, 1), other_seed(2, 0);
  int same = 0;
  for (int i = 0; i < 50; ++i) {
    const double x = base.normal();
    same += x == other_purpose.normal();
    same += x == other_id.normal();
    same += x == other_seed.normal();
  }
  CHECK(same == 0);
}

TEST_CASE("fill_normal draws the same values as repeated normal()") {
  CounterStream a(3, 3), b(3, 3);
  Vector v(5);
  a.fill_normal(v);
  for (int i = 0; i < 5; ++i) CHECK(v[i] == b.normal());
}

TEST_CASE("uniforms lie in the open unit interval with the right moments") {
  CounterStream s(9, 0, StreamPurpose::diagnostic);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(sq / n - mean * mean - 1.0 / 12.0) < 1e-3);
}

TEST_CASE("normals have zero mean, unit variance and zero skew") {
  CounterStream s(11, 5);
  const int n = 200000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = s.normal();
    m1 += g;
    m2 += g * g;
    m3 += g * g * g;
    m4 += g * g * g * g;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 5.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m3) < 5.0 * std::sqrt(15.0 / n));
  CHECK(std::abs(m4 - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("uniform_index covers the range evenly") {
  CounterStream s(5, 1, StreamPurpose::batch);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = s.uniform_index(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(std::abs(c - n / 7) < 5.0 * std::sqrt(n / 7.0));
}
