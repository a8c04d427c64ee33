#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fpt {

// A parametric minifloat format with p mantissa bits (after the leading
// digit) and a q-bit exponent field.  The exponent range is
// emin = -2^(q-1)+2 .. emax = 2^(q-1)-1, so emin + emax = 1 for every q.
struct FpFormat {
    int p = 0;
    int q = 0;
    int emin = 0;
    int emax = 0;

    bool operator==(const FpFormat&) const = default;
};

// Packing caps for the 8-byte matrix entry encoding (2 bits class, 1 bit
// sign, 16 bits biased exponent, 45 bits significand).  Far beyond anything
// this library is used for in practice.
inline constexpr int kMaxP = 40;
inline constexpr int kMaxQ = 16;

inline FpFormat make_format(int p, int q) {
    if (p < 1) throw std::invalid_argument("make_format: need p >= 1");
    if (q < 2) throw std::invalid_argument("make_format: need q >= 2");
    if (p > kMaxP || q > kMaxQ)
        throw std::invalid_argument("make_format: p <= " + std::to_string(kMaxP) +
                                    " and q <= " + std::to_string(kMaxQ) +
                                    " supported by this implementation");
    FpFormat f;
    f.p = p;
    f.q = q;
    f.emin = -(1 << (q - 1)) + 2;
    f.emax = (1 << (q - 1)) - 1;
    return f;
}

// p <= 2^(q-1) - 3, i.e. the subnormal spacing is coarse enough that the
// gadget constructions in this library work.  Not required for arithmetic.
inline bool wide_exponent_range(const FpFormat& f) {
    return f.p >= 2 && f.p <= (1 << (f.q - 1)) - 3;
}

// Number of finite values: 2 * (2^p * (emax - emin + 1) + 2^p - 1) + 1.
inline long finite_count(const FpFormat& f) {
    long per_sign = (1L << f.p) * (f.emax - f.emin + 1) + (1L << f.p) - 1;
    return 2 * per_sign + 1;
}

}  // namespace fpt
