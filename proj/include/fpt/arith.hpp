#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "fpt/exact.hpp"
#include "fpt/fp.hpp"
#include "fpt/format.hpp"

namespace fpt {

namespace detail {

using u128 = unsigned __int128;

inline int bitlen(u128 v) {
    int n = 0;
    while (v) {
        ++n;
        v >>= 1;
    }
    return n;
}

// Round sign * mag * 2^k to nearest-even in the format; rounds to infinity
// at or beyond max + half an ulp.
inline Fp round_scaled(bool neg, u128 mag, long k, const FpFormat& f) {
    if (mag == 0) return fp_zero(f);
    int sign = neg ? -1 : 1;
    int len = bitlen(mag);
    long eval = k + len - 1;  // floor(log2(value))
    if (eval > f.emax) return neg ? fp_ninf() : fp_pinf();
    long e = eval < f.emin ? f.emin : eval;
    long sh = (e - f.p) - k;  // bits to drop (negative: bits to add)
    u128 r;
    if (sh <= 0) {
        r = mag << static_cast<int>(-sh);  // -sh <= p, see callers
    } else if (sh > len) {
        return fp_zero(f);  // below half an ulp of the smallest grid
    } else {
        r = mag >> static_cast<int>(sh);
        u128 rem = mag & ((u128{1} << static_cast<int>(sh)) - 1);
        u128 half = u128{1} << static_cast<int>(sh - 1);
        if (rem > half || (rem == half && (r & 1))) ++r;
    }
    u128 lim = u128{1} << (f.p + 1);
    int exp = static_cast<int>(e);
    if (r >= lim) {
        if (exp == f.emax) return neg ? fp_ninf() : fp_pinf();
        // r can only reach lim exactly here (carry out of the top bit)
        r = u128{1} << f.p;
        ++exp;
    }
    return fp_finite(sign, exp, static_cast<int64_t>(r), f);
}

}  // namespace detail

inline std::atomic<uint64_t>& div_violation_counter() {
    static std::atomic<uint64_t> n{0};
    return n;
}

struct FpDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Fp fp_add(const Fp& x, const Fp& y, const FpFormat& f) {
    if (fp_is_nan(x) || fp_is_nan(y)) return fp_nan();
    if (fp_is_inf(x) || fp_is_inf(y)) {
        bool px = x.cls == FpClass::PosInf, nx = x.cls == FpClass::NegInf;
        bool py = y.cls == FpClass::PosInf, ny = y.cls == FpClass::NegInf;
        if ((px && ny) || (nx && py)) return fp_nan();
        return (px || py) ? fp_pinf() : fp_ninf();
    }
    if (x.sig == 0) return y;
    if (y.sig == 0) return x;
    long d = static_cast<long>(x.exp) - y.exp;
    if (d > 60 || d < -60) {
        // shifts too wide for the integer path; exact rational fallback
        return round_exact(mpq_class(fp_to_mpq(x, f) + fp_to_mpq(y, f)), f);
    }
    long k = (d >= 0 ? y.exp : x.exp) - static_cast<long>(f.p);
    detail::u128 mx = static_cast<detail::u128>(x.sig) << (d >= 0 ? d : 0);
    detail::u128 my = static_cast<detail::u128>(y.sig) << (d >= 0 ? 0 : -d);
    bool neg;
    detail::u128 mag;
    if (x.sign == y.sign) {
        neg = x.sign < 0;
        mag = mx + my;
    } else {
        bool x_bigger = mx > my;
        if (mx == my) return fp_zero(f);
        mag = x_bigger ? mx - my : my - mx;
        neg = (x_bigger ? x.sign : y.sign) < 0;
    }
    return detail::round_scaled(neg, mag, k, f);
}

inline Fp fp_mul(const Fp& x, const Fp& y, const FpFormat& f) {
    if (fp_is_nan(x) || fp_is_nan(y)) return fp_nan();
    if (fp_is_inf(x) || fp_is_inf(y)) {
        if (fp_is_zero(x) || fp_is_zero(y)) return fp_nan();
        int sx = x.cls == FpClass::NegInf ? -1 : x.cls == FpClass::PosInf ? 1 : x.sign;
        int sy = y.cls == FpClass::NegInf ? -1 : y.cls == FpClass::PosInf ? 1 : y.sign;
        return sx * sy > 0 ? fp_pinf() : fp_ninf();
    }
    if (x.sig == 0 || y.sig == 0) return fp_zero(f);
    detail::u128 mag = static_cast<detail::u128>(x.sig) * static_cast<detail::u128>(y.sig);
    long k = static_cast<long>(x.exp) + y.exp - 2L * f.p;
    return detail::round_scaled(x.sign != y.sign, mag, k, f);
}

inline Fp fp_sub(const Fp& x, const Fp& y, const FpFormat& f) {
    return fp_add(x, fp_neg(y), f);
}

// Division is only defined on 0 <= x <= y < inf with y > 0, plus NaN / NaN
// propagation through y.  Anything else is a contract violation: it bumps a
// process-wide counter (so a test run can prove no construction ever strays)
// and throws.
inline Fp fp_div(const Fp& x, const Fp& y, const FpFormat& f) {
    if (fp_is_nan(y)) return fp_nan();
    bool ok = fp_is_finite(x) && fp_is_finite(y) && !fp_is_zero(y) && y.sign > 0 &&
              (fp_is_zero(x) || (x.sign > 0 && fp_cmp(x, y) <= 0));
    if (!ok) {
        div_violation_counter().fetch_add(1, std::memory_order_relaxed);
        throw FpDomainError("fp_div: arguments outside 0 <= x <= y, y > 0");
    }
    if (fp_is_zero(x)) return fp_zero(f);
    return round_exact(mpq_class(fp_to_mpq(x, f) / fp_to_mpq(y, f)), f);
}

inline Fp rounded_relu(const Fp& x, const FpFormat& f) {
    switch (x.cls) {
        case FpClass::Nan: return fp_nan();
        case FpClass::PosInf: return fp_pinf();
        case FpClass::NegInf: return fp_zero(f);
        default: return (x.sig == 0 || x.sign < 0) ? fp_zero(f) : x;
    }
}

namespace detail {

// exp(x) for finite nonzero x, by MPFR interval refinement: compute a
// certified enclosure, round both ends into the format, and raise precision
// until they agree.  exp(x) is irrational for rational x != 0, so a tie
// against the rounding midpoint never happens and this terminates.
inline Fp exp_finite(const Fp& x, const FpFormat& f) {
    mpq_class xv = fp_to_mpq(x, f);
    // Past these bounds the result is out of range for any supported format
    // (|log(threshold)| < 22722 for q <= 16) and would overflow MPFR's
    // exponent range, so settle it by hand.
    if (xv >= 23000) return fp_pinf();
    if (xv <= -23000) return fp_zero(f);
    for (mpfr_prec_t prec = 64;; prec *= 2) {
        mpfr_t t, lo, hi;
        mpfr_inits2(prec, t, lo, hi, static_cast<mpfr_ptr>(nullptr));
        mpfr_set_q(t, xv.get_mpq_t(), MPFR_RNDD);
        mpfr_exp(lo, t, MPFR_RNDD);
        mpfr_set_q(t, xv.get_mpq_t(), MPFR_RNDU);
        mpfr_exp(hi, t, MPFR_RNDU);
        mpq_class qlo, qhi;
        mpfr_get_q(qlo.get_mpq_t(), lo);
        mpfr_get_q(qhi.get_mpq_t(), hi);
        mpfr_clears(t, lo, hi, static_cast<mpfr_ptr>(nullptr));
        Fp rlo = round_exact(qlo, f);
        Fp rhi = round_exact(qhi, f);
        if (fp_eq(rlo, rhi)) return rlo;
        if (prec > (mpfr_prec_t{1} << 24))
            throw std::logic_error("rounded_exp: enclosure failed to converge");
    }
}

}  // namespace detail

inline Fp rounded_exp(const Fp& x, const FpFormat& f) {
    switch (x.cls) {
        case FpClass::Nan: return fp_nan();
        case FpClass::PosInf: return fp_pinf();
        case FpClass::NegInf: return fp_zero(f);
        default: break;
    }
    if (x.sig == 0) return fp_one(f);
    thread_local std::unordered_map<uint64_t, Fp> memo;
    uint64_t key = encode_bits(x, f) | (static_cast<uint64_t>(f.p) << 48) |
                   (static_cast<uint64_t>(f.q) << 56);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    Fp r = detail::exp_finite(x, f);
    memo.emplace(key, r);
    return r;
}

// Left-associated fold: ((x1 + x2) + x3) + ...  Order matters here, so the
// empty sum is rejected rather than defaulting to zero.
inline Fp left_sum(std::span<const Fp> xs, const FpFormat& f) {
    if (xs.empty()) throw std::invalid_argument("left_sum: empty");
    Fp acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = fp_add(acc, xs[i], f);
    return acc;
}

inline Fp left_sum(const std::vector<Fp>& xs, const FpFormat& f) {
    return left_sum(std::span<const Fp>(xs), f);
}

}  // namespace fpt
