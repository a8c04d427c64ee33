#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpt/format.hpp"

namespace fpt {

enum class FpClass : uint8_t { Finite = 0, PosInf = 1, NegInf = 2, Nan = 3 };

// One value of a parametric minifloat format, kept in canonical form:
//   - finite nonzero: sign in {-1,+1}, emin <= exp <= emax,
//     sig in [1, 2^(p+1)) with sig >= 2^p unless exp == emin
//   - zero: sign = +1, exp = emin, sig = 0 (a single zero, no -0)
//   - infinities and NaN ignore sign/exp/sig
struct Fp {
    FpClass cls = FpClass::Finite;
    int8_t sign = 1;
    int32_t exp = 0;
    int64_t sig = 0;
};

inline bool fp_is_nan(const Fp& x) { return x.cls == FpClass::Nan; }
inline bool fp_is_finite(const Fp& x) { return x.cls == FpClass::Finite; }
inline bool fp_is_inf(const Fp& x) {
    return x.cls == FpClass::PosInf || x.cls == FpClass::NegInf;
}
inline bool fp_is_zero(const Fp& x) {
    return x.cls == FpClass::Finite && x.sig == 0;
}

inline Fp fp_nan() { return Fp{FpClass::Nan, 1, 0, 0}; }
inline Fp fp_pinf() { return Fp{FpClass::PosInf, 1, 0, 0}; }
inline Fp fp_ninf() { return Fp{FpClass::NegInf, 1, 0, 0}; }

inline Fp fp_zero(const FpFormat& f) {
    return Fp{FpClass::Finite, 1, f.emin, 0};
}

inline Fp fp_finite(int sign, int exp, int64_t sig, const FpFormat& f) {
    if (sig == 0) return fp_zero(f);
    if (sign != 1 && sign != -1) throw std::invalid_argument("fp_finite: bad sign");
    if (exp < f.emin || exp > f.emax) throw std::invalid_argument("fp_finite: exp out of range");
    if (sig < 0 || sig >= (int64_t{1} << (f.p + 1)))
        throw std::invalid_argument("fp_finite: sig out of range");
    if (exp != f.emin && sig < (int64_t{1} << f.p))
        throw std::invalid_argument("fp_finite: not normalized");
    return Fp{FpClass::Finite, static_cast<int8_t>(sign), exp, sig};
}

// Smallest positive value, 2^(emin-p).
inline Fp fp_omega(const FpFormat& f) { return fp_finite(1, f.emin, 1, f); }

// Largest finite value, (2 - 2^-p) * 2^emax.
inline Fp fp_max(const FpFormat& f) {
    return fp_finite(1, f.emax, (int64_t{2} << f.p) - 1, f);
}

inline Fp fp_one(const FpFormat& f) {
    if (f.emin > 0 || f.emax < 0) throw std::invalid_argument("fp_one: 1 not representable");
    return fp_finite(1, 0, int64_t{1} << f.p, f);
}

// 2^k, for emin <= k <= emax.
inline Fp fp_pow2(int k, const FpFormat& f) {
    return fp_finite(1, k, int64_t{1} << f.p, f);
}

// Small integers that fit without rounding (|v| <= 2^(p+1), assuming the
// exponent range covers them).  Convenience for tests and gadget code.
inline Fp fp_from_int(long v, const FpFormat& f) {
    if (v == 0) return fp_zero(f);
    int sign = v < 0 ? -1 : 1;
    unsigned long m = v < 0 ? -static_cast<unsigned long>(v) : static_cast<unsigned long>(v);
    int e = f.p;  // m * 2^(e-p) == m
    while (m >= (2UL << f.p)) {
        if (m & 1) throw std::invalid_argument("fp_from_int: not representable");
        m >>= 1;
        ++e;
    }
    while (m < (1UL << f.p) && e > f.emin) {
        m <<= 1;
        --e;
    }
    if (e > f.emax) throw std::invalid_argument("fp_from_int: exponent overflow");
    return fp_finite(sign, e, static_cast<int64_t>(m), f);
}

inline Fp fp_neg(const Fp& x) {
    switch (x.cls) {
        case FpClass::Nan: return x;
        case FpClass::PosInf: return fp_ninf();
        case FpClass::NegInf: return fp_pinf();
        case FpClass::Finite:
            if (x.sig == 0) return x;
            return Fp{FpClass::Finite, static_cast<int8_t>(-x.sign), x.exp, x.sig};
    }
    return x;
}

// Equality of values; NaN compares equal to NaN so containers behave.
inline bool fp_eq(const Fp& a, const Fp& b) {
    if (a.cls != b.cls) return false;
    if (a.cls != FpClass::Finite) return true;
    if (a.sig == 0 && b.sig == 0) return true;
    return a.sign == b.sign && a.exp == b.exp && a.sig == b.sig;
}

// Total order on non-NaN values with -inf < finite < +inf.  NaN is an error.
inline int fp_cmp(const Fp& a, const Fp& b) {
    if (fp_is_nan(a) || fp_is_nan(b)) throw std::invalid_argument("fp_cmp: NaN");
    auto rank = [](const Fp& x) { return x.cls == FpClass::NegInf ? -1 : x.cls == FpClass::PosInf ? 1 : 0; };
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    if (ra != 0) return 0;
    int sa = fp_is_zero(a) ? 0 : a.sign;
    int sb = fp_is_zero(b) ? 0 : b.sign;
    if (sa != sb) return sa < sb ? -1 : 1;
    if (sa == 0) return 0;
    // same nonzero sign: compare magnitudes
    int m = 0;
    if (a.exp != b.exp) m = a.exp < b.exp ? -1 : 1;
    else if (a.sig != b.sig) m = a.sig < b.sig ? -1 : 1;
    return sa > 0 ? m : -m;
}

inline bool fp_less(const Fp& a, const Fp& b) { return fp_cmp(a, b) < 0; }

inline mpq_class fp_to_mpq(const Fp& x, const FpFormat& f) {
    if (!fp_is_finite(x)) throw std::invalid_argument("fp_to_mpq: not finite");
    mpq_class v(x.sig);
    int k = x.exp - f.p;
    if (k >= 0) {
        mpz_class two_k;
        mpz_ui_pow_ui(two_k.get_mpz_t(), 2, static_cast<unsigned long>(k));
        v *= two_k;
    } else {
        mpz_class two_k;
        mpz_ui_pow_ui(two_k.get_mpz_t(), 2, static_cast<unsigned long>(-k));
        v /= two_k;
    }
    if (x.sign < 0) v = -v;
    v.canonicalize();
    return v;
}

// Next value up in the total order.  succ(max) = +inf, succ(-inf) = -max;
// succ(+inf) and succ(NaN) are errors.
inline Fp fp_succ(const Fp& x, const FpFormat& f) {
    if (fp_is_nan(x)) throw std::invalid_argument("fp_succ: NaN");
    if (x.cls == FpClass::PosInf) throw std::invalid_argument("fp_succ: +inf");
    if (x.cls == FpClass::NegInf) return fp_neg(fp_max(f));
    if (x.sig == 0) return fp_omega(f);
    if (x.sign > 0) {
        int64_t sig = x.sig + 1;
        int exp = x.exp;
        if (sig == (int64_t{2} << f.p)) {
            if (exp == f.emax) return fp_pinf();
            sig = int64_t{1} << f.p;
            ++exp;
        }
        return fp_finite(1, exp, sig, f);
    }
    int64_t sig = x.sig - 1;
    int exp = x.exp;
    if (sig == 0 && exp == f.emin) return fp_zero(f);
    if (sig < (int64_t{1} << f.p) && exp > f.emin) {
        sig = (int64_t{2} << f.p) - 1;
        --exp;
    }
    return fp_finite(-1, exp, sig, f);
}

inline Fp fp_pred(const Fp& x, const FpFormat& f) {
    if (fp_is_nan(x)) throw std::invalid_argument("fp_pred: NaN");
    return fp_neg(fp_succ(fp_neg(x), f));
}

// All finite values in ascending order, -max .. +max.
inline std::vector<Fp> enumerate_finite(const FpFormat& f) {
    std::vector<Fp> out;
    out.reserve(static_cast<size_t>(finite_count(f)));
    Fp x = fp_neg(fp_max(f));
    for (;;) {
        out.push_back(x);
        if (fp_eq(x, fp_max(f))) break;
        x = fp_succ(x, f);
    }
    return out;
}

// Finite values plus -inf, +inf, NaN (NaN last).
inline std::vector<Fp> enumerate_all(const FpFormat& f) {
    std::vector<Fp> out;
    out.push_back(fp_ninf());
    auto fin = enumerate_finite(f);
    out.insert(out.end(), fin.begin(), fin.end());
    out.push_back(fp_pinf());
    out.push_back(fp_nan());
    return out;
}

// ---- bit encoding ----
//
// Layout (p + q + 1 bits): sign | biased exponent (q bits) | mantissa (p bits).
// Bias is 2^(q-1) - 1.  Exponent field 0 holds zero and subnormals, the
// all-ones field holds infinities (mantissa 0) and NaN (mantissa nonzero).
// The canonical NaN sets the mantissa MSB.  -0 decodes to the single zero.

inline int bit_width(const FpFormat& f) { return f.p + f.q + 1; }

inline uint64_t encode_bits(const Fp& x, const FpFormat& f) {
    uint64_t bias = (1ULL << (f.q - 1)) - 1;
    uint64_t ones = (1ULL << f.q) - 1;
    uint64_t s, ef, mf;
    switch (x.cls) {
        case FpClass::Nan:
            s = 0; ef = ones; mf = 1ULL << (f.p - 1);
            break;
        case FpClass::PosInf:
            s = 0; ef = ones; mf = 0;
            break;
        case FpClass::NegInf:
            s = 1; ef = ones; mf = 0;
            break;
        case FpClass::Finite:
        default:
            s = x.sign < 0 ? 1 : 0;
            if (x.sig < (int64_t{1} << f.p)) {
                // zero or subnormal, exponent field 0
                ef = 0;
                mf = static_cast<uint64_t>(x.sig);
            } else {
                ef = static_cast<uint64_t>(x.exp) + bias;
                mf = static_cast<uint64_t>(x.sig) - (1ULL << f.p);
            }
            break;
    }
    return (s << (f.p + f.q)) | (ef << f.p) | mf;
}

inline Fp decode_bits(uint64_t bits, const FpFormat& f) {
    if (f.p + f.q + 1 < 64 && (bits >> (f.p + f.q + 1)) != 0)
        throw std::invalid_argument("decode_bits: pattern wider than format");
    uint64_t bias = (1ULL << (f.q - 1)) - 1;
    uint64_t ones = (1ULL << f.q) - 1;
    uint64_t s = (bits >> (f.p + f.q)) & 1;
    uint64_t ef = (bits >> f.p) & ones;
    uint64_t mf = bits & ((1ULL << f.p) - 1);
    if (ef == ones) {
        if (mf != 0) return fp_nan();
        return s ? fp_ninf() : fp_pinf();
    }
    if (ef == 0) {
        if (mf == 0) return fp_zero(f);  // +0 and -0 both decode to the zero
        return fp_finite(s ? -1 : 1, f.emin, static_cast<int64_t>(mf), f);
    }
    return fp_finite(s ? -1 : 1, static_cast<int>(ef - bias),
                     static_cast<int64_t>(mf) + (int64_t{1} << f.p), f);
}

inline std::string to_hex(const Fp& x, const FpFormat& f) {
    uint64_t bits = encode_bits(x, f);
    int nibbles = (bit_width(f) + 3) / 4;
    static const char* digits = "0123456789abcdef";
    std::string s(static_cast<size_t>(nibbles), '0');
    for (int i = nibbles - 1; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[bits & 0xf];
        bits >>= 4;
    }
    return "0x" + s;
}

inline Fp from_hex(const std::string& s, const FpFormat& f) {
    std::string t = s;
    if (t.rfind("0x", 0) == 0 || t.rfind("0X", 0) == 0) t = t.substr(2);
    if (t.empty() || t.size() > 16) throw std::invalid_argument("from_hex: bad literal");
    uint64_t bits = 0;
    for (char c : t) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw std::invalid_argument("from_hex: bad digit");
        bits = (bits << 4) | static_cast<uint64_t>(d);
    }
    return decode_bits(bits, f);
}

// Exact decimal rendering; every finite value is a dyadic rational so this
// always terminates.
inline std::string to_decimal(const Fp& x, const FpFormat& f) {
    switch (x.cls) {
        case FpClass::Nan: return "nan";
        case FpClass::PosInf: return "inf";
        case FpClass::NegInf: return "-inf";
        default: break;
    }
    if (x.sig == 0) return "0";
    int k = x.exp - f.p;  // value = sign * sig * 2^k
    mpz_class m(static_cast<long>(x.sig));
    std::string body;
    if (k >= 0) {
        mpz_class two_k;
        mpz_ui_pow_ui(two_k.get_mpz_t(), 2, static_cast<unsigned long>(k));
        body = mpz_class(m * two_k).get_str();
    } else {
        // sig / 2^(-k) = sig * 5^(-k) / 10^(-k)
        unsigned long d = static_cast<unsigned long>(-k);
        mpz_class five_d;
        mpz_ui_pow_ui(five_d.get_mpz_t(), 5, d);
        std::string digits = mpz_class(m * five_d).get_str();
        if (digits.size() <= d) digits.insert(0, d + 1 - digits.size(), '0');
        digits.insert(digits.size() - d, ".");
        // trim trailing zeros in the fraction
        while (digits.back() == '0') digits.pop_back();
        if (digits.back() == '.') digits.pop_back();
        body = digits;
    }
    return (x.sign < 0 ? "-" : "") + body;
}

}  // namespace fpt
