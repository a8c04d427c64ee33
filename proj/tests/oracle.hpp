#pragma once

// Test-side oracle, kept deliberately independent of the library's rounding
// code: rounding is done by scanning every finite value of the format and
// picking the closest one by exact rational distance.

#include <gmpxx.h>

#include <optional>
#include <vector>

#include "fpt/exact.hpp"
#include "fpt/fp.hpp"

namespace oracle {

using fpt::Fp;
using fpt::FpFormat;

struct Table {
    FpFormat fmt;
    std::vector<Fp> finite;  // ascending
    std::vector<mpq_class> vals;
    mpq_class threshold;

    explicit Table(const FpFormat& f) : fmt(f), finite(fpt::enumerate_finite(f)) {
        vals.reserve(finite.size());
        for (const Fp& x : finite) vals.push_back(fpt::fp_to_mpq(x, f));
        // max + half the gap that an extra mantissa bit would add
        mpq_class max = vals.back();
        mpq_class ulp = max - vals[vals.size() - 2];
        threshold = max + ulp / 2;
    }

    Fp round(const mpq_class& x) const {
        if (abs(x) >= threshold) return sgn(x) > 0 ? fpt::fp_pinf() : fpt::fp_ninf();
        size_t best = 0;
        mpq_class bestd = abs(x - vals[0]);
        bool tied = false;
        size_t tie_other = 0;
        for (size_t i = 1; i < vals.size(); ++i) {
            mpq_class d = abs(x - vals[i]);
            if (d < bestd) {
                bestd = d;
                best = i;
                tied = false;
            } else if (d == bestd) {
                tied = true;
                tie_other = i;
            }
        }
        if (tied) {
            // exactly two candidates tie; take the one with even significand
            if (finite[tie_other].sig % 2 == 0) best = tie_other;
        }
        return finite[best];
    }
};

// A.1-style special value handling, written out case by case.
inline std::optional<Fp> add_special(const Fp& x, const Fp& y) {
    using fpt::FpClass;
    if (x.cls == FpClass::Nan || y.cls == FpClass::Nan) return fpt::fp_nan();
    if (x.cls == FpClass::PosInf) {
        if (y.cls == FpClass::NegInf) return fpt::fp_nan();
        return fpt::fp_pinf();
    }
    if (x.cls == FpClass::NegInf) {
        if (y.cls == FpClass::PosInf) return fpt::fp_nan();
        return fpt::fp_ninf();
    }
    if (y.cls == FpClass::PosInf) return fpt::fp_pinf();
    if (y.cls == FpClass::NegInf) return fpt::fp_ninf();
    return std::nullopt;
}

inline std::optional<Fp> mul_special(const Fp& x, const Fp& y) {
    using fpt::FpClass;
    if (x.cls == FpClass::Nan || y.cls == FpClass::Nan) return fpt::fp_nan();
    bool xi = fpt::fp_is_inf(x), yi = fpt::fp_is_inf(y);
    if (!xi && !yi) return std::nullopt;
    if (fpt::fp_is_zero(x) || fpt::fp_is_zero(y)) return fpt::fp_nan();
    int sx = x.cls == FpClass::PosInf ? 1 : x.cls == FpClass::NegInf ? -1 : x.sign;
    int sy = y.cls == FpClass::PosInf ? 1 : y.cls == FpClass::NegInf ? -1 : y.sign;
    return sx * sy > 0 ? fpt::fp_pinf() : fpt::fp_ninf();
}

inline Fp add(const Table& t, const Fp& x, const Fp& y) {
    if (auto s = add_special(x, y)) return *s;
    return t.round(mpq_class(fpt::fp_to_mpq(x, t.fmt) + fpt::fp_to_mpq(y, t.fmt)));
}

inline Fp mul(const Table& t, const Fp& x, const Fp& y) {
    if (auto s = mul_special(x, y)) return *s;
    return t.round(mpq_class(fpt::fp_to_mpq(x, t.fmt) * fpt::fp_to_mpq(y, t.fmt)));
}

}  // namespace oracle
