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

// Two's-complement fixed-point numbers, in the clear (PlainFixed) and as
// little-endian vectors of encrypted bits (EncWord), with the boolean
// circuits the partitioner needs.
//
// Truncation is floor on the raw scale everywhere: dropping low bits of a
// two's-complement word. Arithmetic is exact within range; leaving the range
// is a caller error that CleartextBackend reports as OverflowError.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpfhe/errors.hpp"
#include "dpfhe/gate_backend.hpp"

namespace dpfhe {

// Total width T and fractional width F of a fixed-point word.
struct FixedFormat {
  int total_bits = 16;
  int frac_bits = 8;

  // T >= F + 2 leaves at least one integer bit and the sign bit. T <= 31
  // keeps double-width products inside int64.
  void validate() const {
    if (frac_bits < 0 || total_bits < frac_bits + 2 || total_bits > 31)
      throw PreconditionError("invalid fixed-point format " + to_string() +
                              " (need 0 <= F, F + 2 <= T <= 31)");
  }

  std::int64_t max_raw() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  std::int64_t min_raw() const { return -(std::int64_t{1} << (total_bits - 1)); }
  double step() const { return std::ldexp(1.0, -frac_bits); }
  double max_value() const { return std::ldexp(static_cast<double>(max_raw()), -frac_bits); }
  double min_value() const { return std::ldexp(static_cast<double>(min_raw()), -frac_bits); }

  std::string to_string() const {
    return std::to_string(total_bits) + ":" + std::to_string(frac_bits);
  }

  // Parses "T:F".
  static FixedFormat parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
      throw PreconditionError("format must be T:F, got '" + text + "'");
    FixedFormat fmt;
    try {
      fmt.total_bits = std::stoi(text.substr(0, colon));
      fmt.frac_bits = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw PreconditionError("format must be T:F, got '" + text + "'");
    }
    fmt.validate();
    return fmt;
  }

  friend bool operator==(const FixedFormat&, const FixedFormat&) = default;
};

// Format of plaintext reciprocal coefficients 1/len used when averaging a
// bucket. Its width is independent of the data format so the averaging
// multiplier stays a handful of shifted additions.
inline constexpr FixedFormat kReciprocalFormat{10, 8};

// Plaintext mirror of EncWord: value = raw * 2^-F.
struct PlainFixed {
  std::int64_t raw = 0;
  FixedFormat format{};

  double value() const { return std::ldexp(static_cast<double>(raw), -format.frac_bits); }

  friend bool operator==(const PlainFixed&, const PlainFixed&) = default;
};

inline PlainFixed from_raw(std::int64_t raw, FixedFormat fmt) {
  if (raw < fmt.min_raw() || raw > fmt.max_raw())
    throw OverflowError("raw value " + std::to_string(raw) + " out of range for format " +
                        fmt.to_string());
  return PlainFixed{raw, fmt};
}

// raw = floor(x * 2^F).
inline PlainFixed encode(double x, FixedFormat fmt) {
  fmt.validate();
  if (!std::isfinite(x)) throw OverflowError("cannot encode a non-finite value");
  const double scaled = std::floor(std::ldexp(x, fmt.frac_bits));
  if (scaled < static_cast<double>(fmt.min_raw()) || scaled > static_cast<double>(fmt.max_raw()))
    throw OverflowError("value " + std::to_string(x) + " out of range for format " +
                        fmt.to_string());
  return PlainFixed{static_cast<std::int64_t>(scaled), fmt};
}

// Plaintext fixed-point arithmetic with exactly the semantics of the EncWord
// circuits below. The reference oracle is written against these.
namespace plain {

inline void require_same(const PlainFixed& a, const PlainFixed& b) {
  if (a.format != b.format) throw PreconditionError("fixed-point format mismatch");
}

inline PlainFixed add(const PlainFixed& a, const PlainFixed& b) {
  require_same(a, b);
  return from_raw(a.raw + b.raw, a.format);
}

// Clamps to the format extremes instead of failing.
inline PlainFixed add_sat(const PlainFixed& a, const PlainFixed& b) {
  require_same(a, b);
  const std::int64_t r = a.raw + b.raw;
  return PlainFixed{std::clamp(r, a.format.min_raw(), a.format.max_raw()), a.format};
}

inline PlainFixed sub(const PlainFixed& a, const PlainFixed& b) {
  require_same(a, b);
  return from_raw(a.raw - b.raw, a.format);
}

inline PlainFixed neg(const PlainFixed& a) { return from_raw(-a.raw, a.format); }

inline PlainFixed abs(const PlainFixed& a) { return a.raw < 0 ? neg(a) : a; }

inline bool lt(const PlainFixed& a, const PlainFixed& b) {
  require_same(a, b);
  return a.raw < b.raw;
}

inline PlainFixed select(bool sel, const PlainFixed& a, const PlainFixed& b) {
  require_same(a, b);
  return sel ? a : b;
}

inline PlainFixed min(const PlainFixed& a, const PlainFixed& b) { return select(lt(a, b), a, b); }

// floor(a * c) in a's format; the arithmetic shift floors negative products.
inline PlainFixed mul_plain(const PlainFixed& a, const PlainFixed& c) {
  return from_raw((a.raw * c.raw) >> c.format.frac_bits, a.format);
}

inline PlainFixed sum(std::span<const PlainFixed> words) {
  if (words.empty()) throw PreconditionError("sum of an empty list");
  PlainFixed acc = words.front();
  for (std::size_t i = 1; i < words.size(); ++i) acc = add(acc, words[i]);
  return acc;
}

}  // namespace plain

// Fixed-point word of encrypted bits, little-endian two's complement.
struct EncWord {
  std::vector<EncBit> bits;
  FixedFormat format{};

  void digest_into(Fnv1a& h) const {
    h.update(static_cast<std::uint64_t>(format.total_bits) << 8 |
             static_cast<std::uint64_t>(format.frac_bits));
    for (const auto& bit : bits) bit.digest_into(h);
  }
};

namespace detail {

using Bits = std::vector<EncBit>;

struct AddResult {
  Bits sum;
  EncBit carry_into_msb;
  EncBit carry_out;
};

// Ripple-carry adder over equal-width operands. 5 gates per bit.
template <GateBackend B>
AddResult ripple_add(B& b, std::span<const EncBit> x, std::span<const EncBit> y,
                     EncBit carry) {
  AddResult r;
  r.sum.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i + 1 == x.size()) r.carry_into_msb = carry;
    const EncBit t = b.gate_xor(x[i], y[i]);
    r.sum.push_back(b.gate_xor(t, carry));
    carry = b.gate_or(b.gate_and(x[i], y[i]), b.gate_and(t, carry));
  }
  r.carry_out = carry;
  return r;
}

template <GateBackend B>
Bits invert(B& b, std::span<const EncBit> x) {
  Bits out;
  out.reserve(x.size());
  for (const auto& bit : x) out.push_back(b.gate_not(bit));
  return out;
}

// x - y = x + ~y + 1.
template <GateBackend B>
Bits ripple_sub(B& b, std::span<const EncBit> x, std::span<const EncBit> y) {
  const Bits ny = invert(b, y);
  return ripple_add(b, x, ny, b.trivial(true)).sum;
}

template <GateBackend B>
Bits trivial_bits(const B& b, std::int64_t raw, int width) {
  Bits out;
  out.reserve(static_cast<std::size_t>(width));
  for (int i = 0; i < width; ++i) out.push_back(b.trivial(((raw >> i) & 1) != 0));
  return out;
}

inline Bits sign_extend(std::span<const EncBit> x, std::size_t width) {
  Bits out(x.begin(), x.end());
  while (out.size() < width) out.push_back(x.back());
  return out;
}

// Simulator-only read of a word's integer value.
template <GateBackend B>
std::int64_t peek_raw(const B& b, std::span<const EncBit> bits) {
  std::int64_t v = 0;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (b.peek(bits[i])) v |= std::int64_t{1} << i;
  if (!bits.empty() && b.peek(bits.back())) v -= std::int64_t{1} << bits.size();
  return v;
}

template <GateBackend B>
void check_range(const B&, std::int64_t raw, FixedFormat fmt, const char* op) {
  if constexpr (B::kChecksOverflow) {
    if (raw < fmt.min_raw() || raw > fmt.max_raw())
      throw OverflowError(std::string(op) + ": result " + std::to_string(raw) +
                          " out of range for format " + fmt.to_string());
  }
}

inline void require_same(const EncWord& a, const EncWord& b) {
  if (a.format != b.format) throw PreconditionError("fixed-point format mismatch");
  if (a.bits.size() != b.bits.size()) throw PreconditionError("word width mismatch");
}

}  // namespace detail

template <GateBackend B>
EncWord enc_encrypt(const B& b, const SecretKey& key, const PlainFixed& v) {
  EncWord w{{}, v.format};
  w.bits.reserve(static_cast<std::size_t>(v.format.total_bits));
  for (int i = 0; i < v.format.total_bits; ++i)
    w.bits.push_back(b.encrypt_bit(key, ((v.raw >> i) & 1) != 0));
  return w;
}

template <GateBackend B>
EncWord enc_encode(const B& b, const SecretKey& key, double x, FixedFormat fmt) {
  return enc_encrypt(b, key, encode(x, fmt));
}

// Key-less encoding of a public value.
template <GateBackend B>
EncWord enc_trivial(const B& b, const PlainFixed& v) {
  return EncWord{detail::trivial_bits(b, v.raw, v.format.total_bits), v.format};
}

template <GateBackend B>
EncWord enc_encode_trivial(const B& b, double x, FixedFormat fmt) {
  return enc_trivial(b, encode(x, fmt));
}

template <GateBackend B>
PlainFixed enc_decrypt(const B& b, const SecretKey& key, const EncWord& w) {
  std::int64_t v = 0;
  const auto width = w.bits.size();
  for (std::size_t i = 0; i < width; ++i)
    if (b.decrypt_bit(key, w.bits[i])) v |= std::int64_t{1} << i;
  if (width > 0 && ((v >> (width - 1)) & 1)) v -= std::int64_t{1} << width;
  return PlainFixed{v, w.format};
}

template <GateBackend B>
double enc_decode(const B& b, const SecretKey& key, const EncWord& w) {
  return enc_decrypt(b, key, w).value();
}

template <GateBackend B>
EncWord enc_add(B& b, const EncWord& x, const EncWord& y) {
  detail::require_same(x, y);
  if constexpr (B::kChecksOverflow)
    detail::check_range(b, detail::peek_raw(b, x.bits) + detail::peek_raw(b, y.bits), x.format,
                        "enc_add");
  return EncWord{detail::ripple_add(b, x.bits, y.bits, b.trivial(false)).sum, x.format};
}

// Saturates at the format extremes on overflow. Overflow is detected from
// the carries into and out of the sign position.
template <GateBackend B>
EncWord enc_add_sat(B& b, const EncWord& x, const EncWord& y) {
  detail::require_same(x, y);
  auto r = detail::ripple_add(b, x.bits, y.bits, b.trivial(false));
  const EncBit overflow = b.gate_xor(r.carry_into_msb, r.carry_out);
  const EncBit sign = x.bits.back();
  const EncBit not_sign = b.gate_not(sign);
  EncWord out{{}, x.format};
  out.bits.reserve(x.bits.size());
  for (std::size_t i = 0; i < x.bits.size(); ++i) {
    const EncBit& saturated = (i + 1 == x.bits.size()) ? sign : not_sign;
    out.bits.push_back(b.gate_mux(overflow, saturated, r.sum[i]));
  }
  return out;
}

template <GateBackend B>
EncWord enc_sub(B& b, const EncWord& x, const EncWord& y) {
  detail::require_same(x, y);
  if constexpr (B::kChecksOverflow)
    detail::check_range(b, detail::peek_raw(b, x.bits) - detail::peek_raw(b, y.bits), x.format,
                        "enc_sub");
  return EncWord{detail::ripple_sub(b, x.bits, y.bits), x.format};
}

template <GateBackend B>
EncWord enc_neg(B& b, const EncWord& x) {
  if constexpr (B::kChecksOverflow)
    detail::check_range(b, -detail::peek_raw(b, x.bits), x.format, "enc_neg");
  const auto zero = detail::trivial_bits(b, 0, x.format.total_bits);
  return EncWord{detail::ripple_sub(b, zero, x.bits), x.format};
}

// sel = 1 gives a, sel = 0 gives b.
template <GateBackend B>
EncWord enc_select(B& b, const EncBit& sel, const EncWord& x, const EncWord& y) {
  detail::require_same(x, y);
  EncWord out{{}, x.format};
  out.bits.reserve(x.bits.size());
  for (std::size_t i = 0; i < x.bits.size(); ++i)
    out.bits.push_back(b.gate_mux(sel, x.bits[i], y.bits[i]));
  return out;
}

// Conditional negate on the sign bit. The most negative word has no
// representable absolute value.
template <GateBackend B>
EncWord enc_abs(B& b, const EncWord& x) {
  const EncWord negated = enc_neg(b, x);
  return enc_select(b, x.bits.back(), negated, x);
}

// [x < y] from the sign of x - y computed one bit wider, so it never wraps.
template <GateBackend B>
EncBit enc_lt(B& b, const EncWord& x, const EncWord& y) {
  detail::require_same(x, y);
  const std::size_t width = x.bits.size() + 1;
  const auto xe = detail::sign_extend(x.bits, width);
  const auto ye = detail::sign_extend(y.bits, width);
  return detail::ripple_sub(b, xe, ye).back();
}

template <GateBackend B>
EncWord enc_min(B& b, const EncWord& x, const EncWord& y) {
  return enc_select(b, enc_lt(b, x, y), x, y);
}

// floor(x * c) in x's format, where c is public. Shift-and-add over the set
// bits of c in a (T_x + T_c)-bit accumulator, then drop c's fractional bits.
// The gate count depends on c (public) but never on x.
template <GateBackend B>
EncWord enc_mul_plain(B& b, const EncWord& x, const PlainFixed& c) {
  c.format.validate();
  const FixedFormat fmt = x.format;
  if constexpr (B::kChecksOverflow)
    detail::check_range(b, (detail::peek_raw(b, x.bits) * c.raw) >> c.format.frac_bits, fmt,
                        "enc_mul_plain");

  const int width = fmt.total_bits + c.format.total_bits;
  const auto xe = detail::sign_extend(x.bits, static_cast<std::size_t>(width));
  detail::Bits acc;
  for (int i = 0; i < c.format.total_bits; ++i) {
    if (((c.raw >> i) & 1) == 0) continue;
    detail::Bits shifted = detail::trivial_bits(b, 0, i);
    shifted.insert(shifted.end(), xe.begin(), xe.end() - i);
    const bool sign_weight = (i == c.format.total_bits - 1);
    if (acc.empty() && !sign_weight) {
      acc = std::move(shifted);
    } else {
      if (acc.empty()) acc = detail::trivial_bits(b, 0, width);
      acc = sign_weight ? detail::ripple_sub(b, acc, shifted)
                        : detail::ripple_add(b, acc, shifted, b.trivial(false)).sum;
    }
  }
  if (acc.empty()) return EncWord{detail::trivial_bits(b, 0, fmt.total_bits), fmt};
  const auto first = acc.begin() + c.format.frac_bits;
  return EncWord{detail::Bits(first, first + fmt.total_bits), fmt};
}

// Left fold in list order.
template <GateBackend B>
EncWord enc_sum(B& b, std::span<const EncWord> words) {
  if (words.empty()) throw PreconditionError("enc_sum of an empty list");
  EncWord acc = words.front();
  for (std::size_t i = 1; i < words.size(); ++i) acc = enc_add(b, acc, words[i]);
  return acc;
}

}  // namespace dpfhe
