#pragma once

#include <cstdint>
#include <cstring>

namespace tnv {

/// IEEE 754 binary16 conversion. Round-to-nearest-even on the way down;
/// exact widening on the way up. Out-of-range finite values saturate to
/// +-65504 instead of overflowing to infinity (the voxel quantizer warns
/// separately when that happens).

inline std::uint16_t float_to_half(float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
  const std::uint32_t abs = bits & 0x7fffffffu;

  if (abs >= 0x7f800000u) {  // inf / NaN
    if (abs > 0x7f800000u) return static_cast<std::uint16_t>(sign | 0x7e00u);  // quiet NaN
    return static_cast<std::uint16_t>(sign | 0x7bffu);                         // saturate inf
  }
  // 65519.996...: smallest float that rounds past half max (65504 + 16).
  if (abs >= 0x477ff000u) return static_cast<std::uint16_t>(sign | 0x7bffu);

  if (abs < 0x38800000u) {  // subnormal half (|x| < 2^-14)
    if (abs < 0x33000000u) return sign;  // < 2^-25 rounds to zero
    const int shift = 126 - static_cast<int>(abs >> 23);
    std::uint32_t mant = (abs & 0x007fffffu) | 0x00800000u;
    const std::uint32_t rounded = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    std::uint16_t h = static_cast<std::uint16_t>(rounded);
    if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }

  // Normal range: rebias exponent, round 13 mantissa bits away.
  const std::uint32_t rebased = abs - 0x38000000u;  // exponent bias 127 -> 15
  std::uint16_t h = static_cast<std::uint16_t>(rebased >> 13);
  const std::uint32_t rem = rebased & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;
  return static_cast<std::uint16_t>(sign | h);
}

inline float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  const std::uint32_t mant = h & 0x3ffu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {  // subnormal: renormalize
      int e = -1;
      std::uint32_t m = mant;
      while ((m & 0x400u) == 0) {
        m <<= 1;
        ++e;
      }
      bits = sign | ((112u - static_cast<std::uint32_t>(e)) << 23) | ((m & 0x3ffu) << 13);
    }
  } else if (exp == 31) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 112u) << 23) | (mant << 13);
  }
  float out;
  std::memcpy(&out, &bits, sizeof(out));
  return out;
}

inline constexpr float kHalfMax = 65504.0f;

}  // namespace tnv
