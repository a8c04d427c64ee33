#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>

#include "fpt/fp.hpp"
#include "fpt/format.hpp"

namespace fpt {

// An exact intermediate value: a rational or one of the special points.
struct ExactScalar {
    enum class Kind { Rational, PosInf, NegInf, Nan } kind = Kind::Rational;
    mpq_class value = 0;

    static ExactScalar rational(mpq_class v) { return {Kind::Rational, std::move(v)}; }
    static ExactScalar pos_inf() { return {Kind::PosInf, 0}; }
    static ExactScalar neg_inf() { return {Kind::NegInf, 0}; }
    static ExactScalar nan() { return {Kind::Nan, 0}; }
};

inline mpq_class pow2_mpq(long k) {
    mpz_class t;
    mpz_ui_pow_ui(t.get_mpz_t(), 2, static_cast<unsigned long>(k < 0 ? -k : k));
    if (k >= 0) return mpq_class(t);
    mpq_class r(1);
    r /= t;
    return r;
}

// Magnitudes at or above this round to infinity: max + half an ulp,
// (2^(p+2) - 1) * 2^(emax-p-1).
inline mpq_class overflow_threshold(const FpFormat& f) {
    mpq_class t((long{1} << (f.p + 2)) - 1);
    t *= pow2_mpq(f.emax - f.p - 1);
    return t;
}

// floor(log2(|x|)) for x != 0.
inline long floor_log2(const mpq_class& x) {
    if (sgn(x) == 0) throw std::invalid_argument("floor_log2: zero");
    mpz_class num = abs(x.get_num());
    mpz_class den = x.get_den();
    long e = static_cast<long>(mpz_sizeinbase(num.get_mpz_t(), 2)) -
             static_cast<long>(mpz_sizeinbase(den.get_mpz_t(), 2));
    // e is within 1 of the answer; fix up by exact comparison
    mpq_class a = abs(x);
    while (a >= pow2_mpq(e + 1)) ++e;
    while (a < pow2_mpq(e)) --e;
    return e;
}

// Round-to-nearest-even of an exact rational into the format, with overflow
// to the appropriately signed infinity at or beyond the threshold.
inline Fp round_exact(const mpq_class& x, const FpFormat& f) {
    int s = sgn(x);
    if (s == 0) return fp_zero(f);
    mpq_class a = abs(x);
    if (a >= overflow_threshold(f)) return s > 0 ? fp_pinf() : fp_ninf();
    long eval = floor_log2(a);
    long e = eval < f.emin ? f.emin : eval;  // eval <= emax since a < threshold < 2^(emax+1)
    long g = e - f.p;                        // grid spacing exponent
    mpq_class scaled = a * pow2_mpq(-g);
    mpz_class r;
    mpz_fdiv_q(r.get_mpz_t(), scaled.get_num().get_mpz_t(), scaled.get_den().get_mpz_t());
    // compare the remainder against 1/2: 2*(num - r*den) vs den
    mpz_class rem2 = 2 * (scaled.get_num() - r * scaled.get_den());
    int c = cmp(rem2, scaled.get_den());
    if (c > 0 || (c == 0 && mpz_odd_p(r.get_mpz_t()))) r += 1;
    int64_t sig = static_cast<int64_t>(r.get_si());
    int exp = static_cast<int>(e);
    if (sig == (int64_t{2} << f.p)) {
        // carried into the next binade; cannot pass emax below the threshold
        sig = int64_t{1} << f.p;
        ++exp;
        if (exp > f.emax) throw std::logic_error("round_exact: carry past emax");
    }
    return fp_finite(s, exp, sig, f);
}

inline Fp round_exact(const ExactScalar& x, const FpFormat& f) {
    switch (x.kind) {
        case ExactScalar::Kind::PosInf: return fp_pinf();
        case ExactScalar::Kind::NegInf: return fp_ninf();
        case ExactScalar::Kind::Nan: return fp_nan();
        default: return round_exact(x.value, f);
    }
}

// Parse "nan", "inf"/"+inf"/"-inf", a hex bit pattern ("0x1d"), or an exact
// decimal literal ("2.5", "-0.001953125").  Decimal literals must denote a
// representable value exactly; nothing is silently rounded.
inline Fp parse_fp(const std::string& s, const FpFormat& f) {
    if (s == "nan") return fp_nan();
    if (s == "inf" || s == "+inf") return fp_pinf();
    if (s == "-inf") return fp_ninf();
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) return from_hex(s, f);

    size_t i = 0;
    int sign = 1;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        if (s[i] == '-') sign = -1;
        ++i;
    }
    std::string digits;
    long frac_len = 0;
    bool seen_dot = false, seen_digit = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c == '.') {
            if (seen_dot) throw std::invalid_argument("parse_fp: bad literal '" + s + "'");
            seen_dot = true;
        } else if (c >= '0' && c <= '9') {
            digits += c;
            seen_digit = true;
            if (seen_dot) ++frac_len;
        } else {
            throw std::invalid_argument("parse_fp: bad literal '" + s + "'");
        }
    }
    if (!seen_digit) throw std::invalid_argument("parse_fp: bad literal '" + s + "'");
    mpq_class v(mpz_class(digits, 10));
    if (frac_len > 0) {
        mpz_class ten_k;
        mpz_ui_pow_ui(ten_k.get_mpz_t(), 10, static_cast<unsigned long>(frac_len));
        v /= ten_k;
    }
    if (sign < 0) v = -v;
    v.canonicalize();
    if (sgn(v) == 0) return fp_zero(f);
    Fp r = round_exact(v, f);
    if (!fp_is_finite(r) || fp_to_mpq(r, f) != v)
        throw std::invalid_argument("parse_fp: '" + s + "' is not representable exactly");
    return r;
}

}  // namespace fpt
