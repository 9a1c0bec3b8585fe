// Copyright 2026 The dpfhe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dpfhe/enc_fixed.hpp"

namespace dpfhe {
namespace {

constexpr FixedFormat kF10{10, 2};
constexpr FixedFormat kF12{12, 4};
constexpr FixedFormat kF16{16, 8};
const std::vector<FixedFormat> kFormats{kF10, kF12, kF16};

class EncFixedTest : public ::testing::Test {
 protected:
  EncWord E(double x, FixedFormat fmt = kF16) { return enc_encode(b, key, x, fmt); }
  double D(const EncWord& w) { return enc_decode(b, key, w); }

  CleartextBackend b;
  SecretKey key = keygen(42);
};

TEST(FixedFormat, ValidateAndParse) {
  EXPECT_NO_THROW(kF10.validate());
  EXPECT_THROW((FixedFormat{4, 3}).validate(), PreconditionError);
  EXPECT_THROW((FixedFormat{32, 8}).validate(), PreconditionError);
  EXPECT_THROW((FixedFormat{8, -1}).validate(), PreconditionError);
  EXPECT_EQ(FixedFormat::parse("12:4"), kF12);
  EXPECT_THROW(FixedFormat::parse("12"), PreconditionError);
  EXPECT_THROW(FixedFormat::parse("a:b"), PreconditionError);
  EXPECT_EQ(kF16.to_string(), "16:8");
}

TEST(Encode, FloorOnRawScale) {
  EXPECT_EQ(encode(2.3, kF10).raw, 9);
  EXPECT_DOUBLE_EQ(encode(2.3, kF10).value(), 2.25);
  EXPECT_EQ(encode(-0.3, kF10).raw, -2);
  EXPECT_DOUBLE_EQ(encode(-0.3, kF10).value(), -0.5);
  EXPECT_EQ(encode(5.4, kF16).raw, 1382);
  EXPECT_DOUBLE_EQ(encode(5.4, kF16).value(), 5.3984375);
}

TEST(Encode, RangeLimits) {
  EXPECT_EQ(encode(127.75, kF10).raw, 511);
  EXPECT_EQ(encode(-128.0, kF10).raw, -512);
  EXPECT_THROW(encode(128.0, kF10), OverflowError);
  EXPECT_THROW(encode(-128.01, kF10), OverflowError);
  EXPECT_THROW(encode(std::nan(""), kF10), OverflowError);
}

TEST(Encode, TruncationIsOneSided) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-100.0, 100.0);
  for (const auto& fmt : kFormats) {
    for (int i = 0; i < 2000; ++i) {
      const double x = dist(rng);
      const PlainFixed p = encode(x, fmt);
      EXPECT_LE(p.value(), x);
      EXPECT_LT(x, p.value() + fmt.step());
    }
  }
}

TEST_F(EncFixedTest, EncodeDecodeRoundTrip) {
  EXPECT_DOUBLE_EQ(D(E(3.0)), 3.0);
  EXPECT_DOUBLE_EQ(D(E(16.2)), 16.19921875);
  EXPECT_DOUBLE_EQ(D(enc_encode_trivial(b, 0.0, kF16)), 0.0);
  EXPECT_DOUBLE_EQ(enc_decode(b, keygen(999), enc_encode_trivial(b, 0.0, kF16)), 0.0);
  EXPECT_THROW(E(200.0, kF10), OverflowError);
}

TEST_F(EncFixedTest, AddNegSub) {
  EXPECT_DOUBLE_EQ(D(enc_add(b, E(3), E(2))), 5.0);
  EXPECT_DOUBLE_EQ(D(enc_neg(b, E(0))), 0.0);
  EXPECT_DOUBLE_EQ(D(enc_sub(b, E(5), E(17))), -12.0);
}

TEST_F(EncFixedTest, OverflowIsFlaggedByCleartextBackend) {
  EXPECT_THROW(enc_add(b, E(100, kF10), E(100, kF10)), OverflowError);
  EXPECT_THROW(enc_sub(b, E(-100, kF10), E(100, kF10)), OverflowError);
  EXPECT_THROW(enc_neg(b, E(-128, kF10)), OverflowError);
}

TEST_F(EncFixedTest, AddSatClampsBothWays) {
  EXPECT_DOUBLE_EQ(D(enc_add_sat(b, E(100, kF10), E(100, kF10))), kF10.max_value());
  EXPECT_DOUBLE_EQ(D(enc_add_sat(b, E(-100, kF10), E(-100, kF10))), kF10.min_value());
  EXPECT_DOUBLE_EQ(D(enc_add_sat(b, E(10, kF10), E(-3.25, kF10))), 6.75);
}

TEST_F(EncFixedTest, Abs) {
  EXPECT_DOUBLE_EQ(D(enc_abs(b, E(-3.5))), 3.5);
  EXPECT_DOUBLE_EQ(D(enc_abs(b, E(0))), 0.0);
  EXPECT_DOUBLE_EQ(D(enc_abs(b, enc_sub(b, E(2), E(2.5)))), 0.5);
  EXPECT_THROW(enc_abs(b, E(-128, kF10)), OverflowError);
}

TEST_F(EncFixedTest, LtMinSelect) {
  EXPECT_TRUE(b.decrypt_bit(key, enc_lt(b, E(5), E(17))));
  EXPECT_FALSE(b.decrypt_bit(key, enc_lt(b, E(17), E(5))));
  EXPECT_FALSE(b.decrypt_bit(key, enc_lt(b, E(7), E(7))));
  EXPECT_DOUBLE_EQ(D(enc_min(b, E(7), E(7))), 7.0);
  EXPECT_DOUBLE_EQ(D(enc_select(b, b.encrypt_bit(key, true), E(1), E(2))), 1.0);
  EXPECT_DOUBLE_EQ(D(enc_select(b, b.encrypt_bit(key, false), E(1), E(2))), 2.0);
}

TEST_F(EncFixedTest, LtDoesNotWrapAtExtremes) {
  EXPECT_TRUE(b.decrypt_bit(key, enc_lt(b, E(-128, kF10), E(127.75, kF10))));
  EXPECT_FALSE(b.decrypt_bit(key, enc_lt(b, E(127.75, kF10), E(-128, kF10))));
}

TEST_F(EncFixedTest, MinOverAllPairsOfAFourValueSet) {
  const std::vector<double> values{-2.5, 0.0, 3.25, 3.5};
  for (double x : values)
    for (double y : values) EXPECT_DOUBLE_EQ(D(enc_min(b, E(x), E(y))), std::min(x, y));
}

TEST_F(EncFixedTest, MulPlain) {
  // 17 * floor(256/3)/256 = 17 * 85/256, then floor on the 2^-8 grid.
  EXPECT_DOUBLE_EQ(D(enc_mul_plain(b, E(17), encode(1.0 / 3.0, kF16))), 5.64453125);
  EXPECT_DOUBLE_EQ(D(enc_mul_plain(b, E(17), encode(1.0 / 3.0, kReciprocalFormat))), 5.64453125);
  EXPECT_DOUBLE_EQ(D(enc_mul_plain(b, E(-6.75), encode(1.0, kF16))), -6.75);
  EXPECT_DOUBLE_EQ(D(enc_mul_plain(b, E(9.5), encode(0.0, kF16))), 0.0);
  EXPECT_DOUBLE_EQ(D(enc_mul_plain(b, E(9.5), encode(-0.5, kF16))), -4.75);
}

TEST_F(EncFixedTest, Sum) {
  const std::vector<EncWord> three{E(6), E(5), E(6)};
  EXPECT_DOUBLE_EQ(D(enc_sum(b, std::span<const EncWord>(three))), 17.0);
  const std::vector<EncWord> one{E(0)};
  EXPECT_DOUBLE_EQ(D(enc_sum(b, std::span<const EncWord>(one))), 0.0);
  EXPECT_THROW(enc_sum(b, std::span<const EncWord>()), PreconditionError);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dist(0, 10);
  std::vector<EncWord> words;
  std::vector<PlainFixed> plains;
  for (int i = 0; i < 8; ++i) {
    const double v = dist(rng);
    words.push_back(E(v));
    plains.push_back(encode(v, kF16));
  }
  EXPECT_EQ(enc_decrypt(b, key, enc_sum(b, std::span<const EncWord>(words))),
            plain::sum(std::span<const PlainFixed>(plains)));
}

TEST_F(EncFixedTest, FormatMismatchIsRejected) {
  EXPECT_THROW(enc_add(b, E(1, kF10), E(1, kF12)), PreconditionError);
  EXPECT_THROW(plain::add(encode(1, kF10), encode(1, kF12)), PreconditionError);
}

// Every op against its PlainFixed mirror on random in-range inputs.
TEST_F(EncFixedTest, OracleEquivalenceRandomized) {
  std::mt19937_64 rng(7);
  for (const auto& fmt : kFormats) {
    const std::int64_t lim = fmt.max_raw() / 2;
    std::uniform_int_distribution<std::int64_t> raw(-lim, lim);
    std::uniform_int_distribution<std::int64_t> coeff(-300, 300);
    for (int i = 0; i < 300; ++i) {
      const PlainFixed x{raw(rng), fmt};
      const PlainFixed y{raw(rng), fmt};
      const EncWord ex = enc_encrypt(b, key, x);
      const EncWord ey = enc_encrypt(b, key, y);
      EXPECT_EQ(enc_decrypt(b, key, enc_add(b, ex, ey)), plain::add(x, y));
      EXPECT_EQ(enc_decrypt(b, key, enc_sub(b, ex, ey)), plain::sub(x, y));
      EXPECT_EQ(enc_decrypt(b, key, enc_neg(b, ex)), plain::neg(x));
      EXPECT_EQ(enc_decrypt(b, key, enc_abs(b, ex)), plain::abs(x));
      EXPECT_EQ(b.decrypt_bit(key, enc_lt(b, ex, ey)), plain::lt(x, y));
      EXPECT_EQ(enc_decrypt(b, key, enc_min(b, ex, ey)), plain::min(x, y));
      const PlainFixed big_x{raw(rng) * 2, fmt};
      const PlainFixed big_y{raw(rng) * 2, fmt};
      EXPECT_EQ(enc_decrypt(b, key, enc_add_sat(b, enc_encrypt(b, key, big_x),
                                                enc_encrypt(b, key, big_y))),
                plain::add_sat(big_x, big_y));
      const PlainFixed c{coeff(rng), kReciprocalFormat};
      EXPECT_EQ(enc_decrypt(b, key, enc_mul_plain(b, ex, c)), plain::mul_plain(x, c));
    }
  }
}

template <class Op>
std::uint64_t gates_for(FixedFormat fmt, double x, double y, Op op) {
  CountingBackend b;
  const SecretKey k = keygen(1);
  const EncWord ex = enc_encode(b, k, x, fmt);
  const EncWord ey = enc_encode(b, k, y, fmt);
  op(b, ex, ey);
  return b.stats().total();
}

TEST(GateCounts, IndependentOfOperandValues) {
  auto add = [](auto& b, const EncWord& x, const EncWord& y) { enc_add(b, x, y); };
  auto mn = [](auto& b, const EncWord& x, const EncWord& y) { enc_min(b, x, y); };
  for (const auto& fmt : kFormats) {
    EXPECT_EQ(gates_for(fmt, 1, 2, add), gates_for(fmt, -7.5, 30, add));
    EXPECT_EQ(gates_for(fmt, 1, 2, mn), gates_for(fmt, -7.5, 30, mn));
  }
}

TEST(GateCounts, AffineInTotalBits) {
  auto add = [](auto& b, const EncWord& x, const EncWord& y) { enc_add(b, x, y); };
  auto abs = [](auto& b, const EncWord& x, const EncWord&) { enc_abs(b, x); };
  auto lt = [](auto& b, const EncWord& x, const EncWord& y) { enc_lt(b, x, y); };
  auto mn = [](auto& b, const EncWord& x, const EncWord& y) { enc_min(b, x, y); };
  auto check = [](auto op) {
    const double g10 = static_cast<double>(gates_for(kF10, 1, 2, op));
    const double g12 = static_cast<double>(gates_for(kF12, 1, 2, op));
    const double g16 = static_cast<double>(gates_for(kF16, 1, 2, op));
    // Equal per-bit slope over 10->12 and 12->16.
    EXPECT_DOUBLE_EQ((g12 - g10) / 2.0, (g16 - g12) / 4.0);
    EXPECT_GT(g16, g10);
  };
  check(add);
  check(abs);
  check(lt);
  check(mn);
  EXPECT_EQ(gates_for(kF16, 1, 2, add), 5u * 16u);
}

}  // namespace
}  // namespace dpfhe
