#pragma once

// Compiled constructions: exact-equality gadgets, token memorizers, order
// detectors, occurrence counters, and the assembly of full transformer models
// that realize a given target function on a finite domain with bit-exact
// rounded arithmetic.
//
// All builders validate their numeric identities at build time (for example
// that beta (x) alpha rounds to the required target) and throw on failure, so
// a model that builds at all is built from verified constants.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fpt/arith.hpp"
#include "fpt/exact.hpp"
#include "fpt/matrix.hpp"
#include "fpt/pipeline.hpp"
#include "fpt/transformer.hpp"

namespace fpt {

// ---------------------------------------------------------------------------
// Scalar solvers and configuration constants
// ---------------------------------------------------------------------------

inline Fp fp_one_plus(const FpFormat& f) { return fp_succ(fp_one(f), f); }

// Softmax weight each column gets when all attention scores are equal.
inline Fp uniform_softmax_value(int n, const FpFormat& f) {
    if (n < 1) throw std::invalid_argument("uniform_softmax_value: n < 1");
    std::vector<Fp> ones(static_cast<size_t>(n), fp_one(f));
    Fp alpha = fp_div(fp_one(f), left_sum(ones, f), f);
    // The rounded sum of n ones never exceeds 2^(p+1), so alpha >= 2^(-p-1).
    if (fp_cmp(alpha, fp_pow2(-f.p - 1, f)) < 0)
        throw std::logic_error("uniform_softmax_value: below 2^(-p-1)");
    return alpha;
}

// Smallest positive finite y with x (x) y == target, if any.
inline Fp solve_mul_target(const Fp& x, const Fp& target, const FpFormat& f) {
    for (Fp y = fp_succ(fp_zero(f), f); fp_is_finite(y); y = fp_succ(y, f))
        if (fp_eq(fp_mul(x, y, f), target)) return y;
    throw std::logic_error("solve_mul_target: no solution");
}

// Constants for the order-detector attention block.  A position holding the
// trailing member of a triple contributes beta, the two leading members
// contribute beta_prime; after uniform attention the rounded left fold of the
// three contributions equals delta exactly when the trailing member comes
// last, and differs from delta in every other arrangement.
struct OrderDetectorConfig {
    Fp alpha;       // uniform softmax weight for sequence length n
    Fp beta;        // beta (x) alpha == 1 (p = 2) or succ(1) (p >= 3)
    Fp beta_prime;  // beta_prime (x) alpha == succ(1) (p = 2) or succ(succ(1)) (p >= 3)
    Fp delta;       // flag value marking "trailing member seen last"
};

inline OrderDetectorConfig make_order_detector_config(int n, const FpFormat& f) {
    OrderDetectorConfig c;
    c.alpha = uniform_softmax_value(n, f);
    Fp t_low = f.p == 2 ? fp_one(f) : fp_one_plus(f);
    Fp t_high = fp_succ(t_low, f);
    c.beta = solve_mul_target(c.alpha, t_low, f);
    c.beta_prime = solve_mul_target(c.alpha, t_high, f);
    c.delta = fp_add(fp_add(t_high, t_high, f), t_low, f);
    // The flag reaches delta only for the arrangement leading, leading,
    // trailing.  Check every other fold of a sub-multiset of the three
    // contributions (zeros from other positions never change a fold).
    std::vector<Fp> clashes = {
        fp_zero(f),
        t_low,
        t_high,
        fp_add(t_high, t_high, f),
        fp_add(t_low, t_high, f),
        fp_add(fp_add(t_low, t_high, f), t_high, f),  // == trailing-first fold
        fp_add(fp_add(t_high, t_low, f), t_high, f),  // trailing in the middle
    };
    for (const Fp& v : clashes)
        if (fp_eq(v, c.delta)) throw std::logic_error("order detector: delta collides");
    return c;
}

// Constants for the occurrence-counter attention block.
struct CounterConfig {
    Fp alpha;                    // uniform softmax weight for length n
    Fp beta;                     // beta (x) alpha == succ(1)
    int max_distinct = 0;        // 3 * 2^p - 1 distinct counter readings
    Fp saturation;               // 2^(p+2), the reading for every count beyond
    std::vector<Fp> flag_values; // reading after k occurrences, k = 0..n
};

// Rounded left fold of k copies of succ(1), in closed form.
inline Fp sum_of_one_plus(int k, const FpFormat& f) {
    if (k < 0) throw std::invalid_argument("sum_of_one_plus: k < 0");
    long pw = 1L << f.p;
    if (k == 0) return fp_zero(f);
    if (k == 1) return fp_one_plus(f);
    if (k == 2) return fp_succ(fp_from_int(2, f), f);
    if (k == 3) return fp_succ(fp_succ(fp_from_int(3, f), f), f);
    if (k <= pw) return fp_succ(fp_from_int(k, f), f);
    if (k < 2 * pw) return fp_from_int(k + 1, f);
    if (k < 3 * pw - 1) return fp_from_int(2 * pw + 2 * (k - 2 * pw + 1), f);
    return fp_from_int(4 * pw, f);  // saturated at 2^(p+2)
}

inline CounterConfig make_counter_config(int n, const FpFormat& f) {
    if (n < 1) throw std::invalid_argument("make_counter_config: n < 1");
    if (n > 6 * (1 << f.p) - 2)
        throw std::invalid_argument("make_counter_config: counts unrecoverable, need n <= 6*2^p - 2");
    CounterConfig c;
    c.alpha = uniform_softmax_value(n, f);
    c.beta = solve_mul_target(c.alpha, fp_one_plus(f), f);
    c.max_distinct = 3 * (1 << f.p) - 1;
    c.saturation = fp_pow2(f.p + 2, f);
    Fp acc = fp_zero(f);
    for (int k = 0; k <= n; ++k) {
        c.flag_values.push_back(acc);
        if (!fp_eq(acc, sum_of_one_plus(k, f)))
            throw std::logic_error("make_counter_config: closed form mismatch");
        acc = fp_add(acc, fp_one_plus(f), f);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Counting helpers
// ---------------------------------------------------------------------------

// Occurrences of each alphabet token among the columns of a 1 x n sequence.
inline std::vector<int> count_vector(const FpMatrix& x, const std::vector<Fp>& alphabet) {
    if (x.rows() != 1) throw std::invalid_argument("count_vector: expected a token row");
    std::vector<int> counts(alphabet.size(), 0);
    for (int i = 0; i < x.cols(); ++i) {
        bool found = false;
        for (size_t j = 0; j < alphabet.size(); ++j)
            if (fp_eq(x.at(0, i), alphabet[j])) {
                ++counts[j];
                found = true;
                break;
            }
        if (!found) throw std::invalid_argument("count_vector: token not in alphabet");
    }
    return counts;
}

// Invert counter readings back to counts.  Saturated readings are resolved
// from the sequence length; with n <= 6*2^p - 2 at most two tokens saturate,
// and two only when both counts are exactly 3*2^p - 1.
inline std::vector<int> counts_from_flags(const std::vector<Fp>& flags, int n, const FpFormat& f) {
    int md = 3 * (1 << f.p) - 1;
    if (n > 2 * md) throw std::invalid_argument("counts_from_flags: n too large");
    Fp sat = fp_pow2(f.p + 2, f);
    std::vector<int> counts(flags.size(), 0);
    std::vector<size_t> saturated;
    int sum = 0;
    for (size_t j = 0; j < flags.size(); ++j) {
        if (fp_eq(flags[j], sat)) {
            saturated.push_back(j);
            continue;
        }
        bool found = false;
        for (int k = 0; k < md && k <= n; ++k)
            if (fp_eq(flags[j], sum_of_one_plus(k, f))) {
                counts[j] = k;
                sum += k;
                found = true;
                break;
            }
        if (!found) throw std::invalid_argument("counts_from_flags: unknown reading");
    }
    if (saturated.size() == 1) {
        counts[saturated[0]] = n - sum;
        if (counts[saturated[0]] < md) throw std::invalid_argument("counts_from_flags: inconsistent");
    } else if (saturated.size() == 2) {
        if (sum != n - 2 * md) throw std::invalid_argument("counts_from_flags: inconsistent");
        counts[saturated[0]] = counts[saturated[1]] = md;
    } else if (saturated.size() > 2) {
        throw std::invalid_argument("counts_from_flags: too many saturated readings");
    } else if (sum != n) {
        throw std::invalid_argument("counts_from_flags: counts do not sum to n");
    }
    return counts;
}

// For every position triple i1 < i2 < i3, which of the three carries the
// largest value of the permutation.  Two permutations share a signature
// exactly when they differ by swapping the values 0 and 1.
inline std::vector<int> three_max_signature(const Permutation& pi) {
    int n = static_cast<int>(pi.map.size());
    std::vector<int> sig;
    for (int i1 = 0; i1 < n; ++i1)
        for (int i2 = i1 + 1; i2 < n; ++i2)
            for (int i3 = i2 + 1; i3 < n; ++i3) {
                int a = pi.map[i1], b = pi.map[i2], c = pi.map[i3];
                sig.push_back(a > b && a > c ? 0 : (b > c ? 1 : 2));
            }
    return sig;
}

// ---------------------------------------------------------------------------
// Injective encoder
// ---------------------------------------------------------------------------

// What the encoder emits for a single scalar: six nonnegative coordinates
// that jointly determine x.  Used for indicator keys and for tests.
inline std::array<Fp, 6> encode_value(const Fp& x, const FpFormat& f) {
    Fp half = fp_pow2(-1, f), two = fp_from_int(2, f);
    auto triple = [&](const Fp& v) {
        Fp a = rounded_relu(v, f);
        Fp b = rounded_relu(fp_mul(half, v, f), f);
        return std::array<Fp, 3>{rounded_relu(fp_sub(a, fp_mul(two, b, f), f), f),
                                 rounded_relu(fp_sub(fp_mul(two, b, f), a, f), f), b};
    };
    auto pos = triple(x);
    auto neg = triple(fp_neg(x));
    return {pos[0], pos[1], pos[2], neg[0], neg[1], neg[2]};
}

// Two ReLU stages mapping each input coordinate to the six values of
// encode_value.  Injective on finite inputs; outputs lie in [0, 2^emax].
inline Pipeline build_injective_encoder(int d0, const FpFormat& f) {
    if (d0 < 1) throw std::invalid_argument("build_injective_encoder: d0 < 1");
    Fp one = fp_one(f), half = fp_pow2(-1, f);
    Fp two = fp_from_int(2, f), m_one = fp_neg(one), m_two = fp_neg(two), m_half = fp_neg(half);
    Fp zero = fp_zero(f);
    Pipeline pipe;
    pipe.d_in = d0;
    PStage s0, s1;
    for (int i = 0; i < d0; ++i) {
        // a = relu(x), b = relu(x/2), and the mirrored pair for -x
        s0.rows.push_back({{{{-1, i}, one}}, zero});
        s0.rows.push_back({{{{-1, i}, half}}, zero});
        s0.rows.push_back({{{{-1, i}, m_one}}, zero});
        s0.rows.push_back({{{{-1, i}, m_half}}, zero});
        int a = 4 * i, b = 4 * i + 1, an = 4 * i + 2, bn = 4 * i + 3;
        s1.rows.push_back({{{{0, a}, one}, {{0, b}, m_two}}, zero});  // relu(a - 2b)
        s1.rows.push_back({{{{0, a}, m_one}, {{0, b}, two}}, zero});  // relu(2b - a)
        s1.rows.push_back({{{{0, b}, one}}, zero});                   // b itself
        s1.rows.push_back({{{{0, an}, one}, {{0, bn}, m_two}}, zero});
        s1.rows.push_back({{{{0, an}, m_one}, {{0, bn}, two}}, zero});
        s1.rows.push_back({{{{0, bn}, one}}, zero});
    }
    pipe.stages = {s0, s1};
    for (int j = 0; j < 6 * d0; ++j) pipe.outputs.push_back({{{j, one}}, zero});
    return pipe;
}

// ---------------------------------------------------------------------------
// Exact-equality gadget and memorizers
// ---------------------------------------------------------------------------

namespace detail_gadget {

// Constants shared by the equality gadget.  Scaling a nonzero discrepancy
// (at least the smallest subnormal, 2^(emin-p)) by 2^(emax-1) yields at least
// 2^(-p) because emin + emax = 1; 1 - 2^(-p) then survives the complement and
// 2^p * h + (1 - 2^p) collapses everything below 1 to exactly 0.
struct EqConsts {
    Fp one, zero, m_one, m_scale, two_p, one_minus_two_p;
};

inline EqConsts eq_consts(const FpFormat& f) {
    EqConsts c;
    c.one = fp_one(f);
    c.zero = fp_zero(f);
    c.m_one = fp_neg(c.one);
    c.m_scale = fp_neg(fp_pow2(f.emax - 1, f));
    c.two_p = fp_pow2(f.p, f);
    Fp v = round_exact(1 - pow2_mpq(f.p), f);
    if (fp_to_mpq(v, f) != 1 - pow2_mpq(f.p))
        throw std::logic_error("equality gadget: 1 - 2^p not representable");
    c.one_minus_two_p = v;
    return c;
}

// Append the two difference rows relu(u - key) and relu(key - u) for one
// coordinate; returns the index of the first row.
inline int add_diff_rows(PStage& d_stage, const PRef& src, const Fp& key, const FpFormat& f,
                         const EqConsts& c) {
    int base = static_cast<int>(d_stage.rows.size());
    d_stage.rows.push_back({{{src, c.one}}, fp_neg(key)});
    d_stage.rows.push_back({{{src, c.m_one}}, key});
    (void)f;
    return base;
}

// Append the collapse row h = relu(1 + sum of -2^(emax-1) * d_j).
inline int add_collapse_row(PStage& h_stage, int d_stage_idx, const std::vector<int>& d_rows,
                            const EqConsts& c) {
    PRow row;
    for (int j : d_rows) row.terms.push_back({{d_stage_idx, j}, c.m_scale});
    row.bias = c.one;
    h_stage.rows.push_back(std::move(row));
    return static_cast<int>(h_stage.rows.size()) - 1;
}

// Append the exact 0/1 row eq = relu(2^p * h + (1 - 2^p)).
inline int add_eq_row(PStage& e_stage, int h_stage_idx, int h_row, const EqConsts& c) {
    e_stage.rows.push_back({{{{h_stage_idx, h_row}, c.two_p}}, c.one_minus_two_p});
    return static_cast<int>(e_stage.rows.size()) - 1;
}

}  // namespace detail_gadget

// Three ReLU stages computing an exact 0/1 indicator of "the inputs equal the
// key".  Key entries and inputs must lie in [0, 2^emax], the injective
// encoder's range: that bounds every difference below the overflow threshold,
// so no scratch value can become infinite (an infinity in the residual stream
// could never be erased again, since inf + (-inf) is NaN).
inline Pipeline build_indicator(const std::vector<Fp>& key, const FpFormat& f) {
    if (key.empty()) throw std::invalid_argument("build_indicator: empty key");
    Fp bound = fp_pow2(f.emax, f);
    for (const Fp& k : key)
        if (!fp_is_finite(k) || fp_cmp(k, fp_zero(f)) < 0 || fp_cmp(k, bound) > 0)
            throw std::invalid_argument("build_indicator: key must lie in [0, 2^emax]");
    auto c = detail_gadget::eq_consts(f);
    Pipeline pipe;
    pipe.d_in = static_cast<int>(key.size());
    PStage d_stage, h_stage, e_stage;
    std::vector<int> d_rows;
    for (int j = 0; j < pipe.d_in; ++j) {
        int base = detail_gadget::add_diff_rows(d_stage, {-1, j}, key[j], f, c);
        d_rows.push_back(base);
        d_rows.push_back(base + 1);
    }
    int h = detail_gadget::add_collapse_row(h_stage, 0, d_rows, c);
    detail_gadget::add_eq_row(e_stage, 1, h, c);
    pipe.stages = {d_stage, h_stage, e_stage};
    pipe.outputs.push_back({{{0, c.one}}, c.zero});
    (void)h;
    return pipe;
}

struct LookupTable {
    int key_dim = 0;
    int val_dim = 0;
    std::vector<std::vector<Fp>> keys;  // distinct
    std::vector<std::vector<Fp>> vals;  // finite entries
};

inline void validate_table(const LookupTable& t, const FpFormat& f) {
    std::set<std::vector<uint64_t>> seen;
    if (t.keys.size() != t.vals.size()) throw std::invalid_argument("table: keys/vals mismatch");
    for (size_t k = 0; k < t.keys.size(); ++k) {
        if (static_cast<int>(t.keys[k].size()) != t.key_dim ||
            static_cast<int>(t.vals[k].size()) != t.val_dim)
            throw std::invalid_argument("table: entry dimension mismatch");
        std::vector<uint64_t> bits;
        for (const Fp& x : t.keys[k]) {
            if (!fp_is_finite(x)) throw std::invalid_argument("table: keys must be finite");
            bits.push_back(encode_bits(x, f));
        }
        if (!seen.insert(bits).second) throw std::invalid_argument("table: duplicate key");
        for (const Fp& v : t.vals[k])
            if (!fp_is_finite(v)) throw std::invalid_argument("table: values must be finite");
    }
}

// Encoder followed by one full indicator per key: exact lookup on the key
// set, zero everywhere else.  Size grows with keys * key_dim; intended for
// small tables (the shared-gadget memorizer below scales better).
inline Pipeline build_memorizer(const LookupTable& t, const FpFormat& f) {
    validate_table(t, f);
    if (t.keys.empty()) throw std::invalid_argument("build_memorizer: empty table");
    auto c = detail_gadget::eq_consts(f);
    Pipeline pipe = build_injective_encoder(t.key_dim, f);
    pipe.outputs.clear();
    PStage d_stage, h_stage, e_stage;
    for (size_t k = 0; k < t.keys.size(); ++k) {
        std::vector<int> d_rows;
        for (int j = 0; j < t.key_dim; ++j) {
            auto enc = encode_value(t.keys[k][j], f);
            for (int u = 0; u < 6; ++u) {
                int base = detail_gadget::add_diff_rows(d_stage, {1, 6 * j + u}, enc[u], f, c);
                d_rows.push_back(base);
                d_rows.push_back(base + 1);
            }
        }
        detail_gadget::add_collapse_row(h_stage, 2, d_rows, c);
        detail_gadget::add_eq_row(e_stage, 3, static_cast<int>(k), c);
    }
    pipe.stages.push_back(d_stage);
    pipe.stages.push_back(h_stage);
    pipe.stages.push_back(e_stage);
    for (int r = 0; r < t.val_dim; ++r) {
        PLinRow row;
        row.bias = c.zero;
        for (size_t k = 0; k < t.keys.size(); ++k)
            row.terms.emplace_back(static_cast<int>(k), t.vals[k][r]);
        pipe.outputs.push_back(std::move(row));
    }
    return pipe;
}

// Memorizer that shares one equality gadget per (feature, value) pair among
// all keys, then selects keys with one-hot rows over the per-pair mismatch
// bits.  Exact on the key set, zero everywhere else.
//
// Every compared value must lie in [0, 2^emax] so no difference row can
// overflow; input coordinates outside that range pass through the injective
// encoder first.  A coordinate may be declared bounded when the caller
// guarantees all inputs on it stay in [0, 2^emax] (for example flag
// coordinates written by our own attention blocks); those are compared raw,
// which keeps the gadget count down.
inline Pipeline build_shared_memorizer(const LookupTable& t, const FpFormat& f,
                                       const std::vector<bool>& bounded = {}) {
    validate_table(t, f);
    if (t.keys.empty()) throw std::invalid_argument("build_shared_memorizer: empty table");
    if (!bounded.empty() && static_cast<int>(bounded.size()) != t.key_dim)
        throw std::invalid_argument("build_shared_memorizer: bounded size mismatch");
    auto is_bounded = [&](int j) { return !bounded.empty() && bounded[static_cast<size_t>(j)]; };
    Fp range = fp_pow2(f.emax, f);
    for (auto& key : t.keys)
        for (int j = 0; j < t.key_dim; ++j)
            if (is_bounded(j) &&
                (fp_cmp(key[static_cast<size_t>(j)], fp_zero(f)) < 0 ||
                 fp_cmp(key[static_cast<size_t>(j)], range) > 0))
                throw std::invalid_argument(
                    "build_shared_memorizer: bounded key value outside [0, 2^emax]");
    auto c = detail_gadget::eq_consts(f);

    // Features: 6 encoder outputs per unbounded coordinate, the raw
    // coordinate itself when bounded.
    Pipeline pipe;
    pipe.d_in = t.key_dim;
    std::vector<int> enc_slot(static_cast<size_t>(t.key_dim), -1);
    Fp one = fp_one(f), half = fp_pow2(-1, f), zero = fp_zero(f);
    Fp two = fp_from_int(2, f), m_one = fp_neg(one), m_two = fp_neg(two), m_half = fp_neg(half);
    PStage s0, s1;
    for (int j = 0; j < t.key_dim; ++j) {
        if (is_bounded(j)) continue;
        enc_slot[static_cast<size_t>(j)] = static_cast<int>(s1.rows.size());
        int a = static_cast<int>(s0.rows.size());
        s0.rows.push_back({{{{-1, j}, one}}, zero});
        s0.rows.push_back({{{{-1, j}, half}}, zero});
        s0.rows.push_back({{{{-1, j}, m_one}}, zero});
        s0.rows.push_back({{{{-1, j}, m_half}}, zero});
        int b = a + 1, an = a + 2, bn = a + 3;
        s1.rows.push_back({{{{0, a}, one}, {{0, b}, m_two}}, zero});
        s1.rows.push_back({{{{0, a}, m_one}, {{0, b}, two}}, zero});
        s1.rows.push_back({{{{0, b}, one}}, zero});
        s1.rows.push_back({{{{0, an}, one}, {{0, bn}, m_two}}, zero});
        s1.rows.push_back({{{{0, an}, m_one}, {{0, bn}, two}}, zero});
        s1.rows.push_back({{{{0, bn}, one}}, zero});
    }
    bool any_encoded = !s0.rows.empty();
    int stage_off = any_encoded ? 2 : 0;  // index of the difference stage
    if (any_encoded) {
        pipe.stages.push_back(std::move(s0));
        pipe.stages.push_back(std::move(s1));
    }

    // Per-key feature list: (source ref for the live value, key-side value).
    auto features = [&](const std::vector<Fp>& key) {
        std::vector<std::pair<PRef, Fp>> fs;
        for (int j = 0; j < t.key_dim; ++j) {
            if (is_bounded(j)) {
                fs.push_back({{-1, j}, key[static_cast<size_t>(j)]});
            } else {
                auto e6 = encode_value(key[static_cast<size_t>(j)], f);
                for (int u = 0; u < 6; ++u)
                    fs.push_back({{1, enc_slot[static_cast<size_t>(j)] + u}, e6[static_cast<size_t>(u)]});
            }
        }
        return fs;
    };

    // Distinct (feature, value) pairs across all keys.  Feature identity is
    // the source reference; values are compared by bit pattern.
    PStage d_stage, h_stage, e_stage, neq_stage, oh_stage;
    std::map<std::tuple<int, int, uint64_t>, int> pair_idx;  // -> eq/neq row index
    for (auto& key : t.keys)
        for (auto& [src, val] : features(key)) {
            auto pk = std::make_tuple(src.stage, src.idx, encode_bits(val, f));
            if (!pair_idx.emplace(pk, static_cast<int>(h_stage.rows.size())).second) continue;
            int base = detail_gadget::add_diff_rows(d_stage, src, val, f, c);
            detail_gadget::add_collapse_row(h_stage, stage_off, {base, base + 1}, c);
            int h = static_cast<int>(h_stage.rows.size()) - 1;
            detail_gadget::add_eq_row(e_stage, stage_off + 1, h, c);
            // neq = relu(1 - eq), exact 0/1
            neq_stage.rows.push_back({{{{stage_off + 2, h}, c.m_one}}, c.one});
        }
    // One-hot per key: relu(1 + sum of -neq over its pairs).  The fold of
    // 0/-1 terms saturates but stays <= -1 on any mismatch.
    for (auto& key : t.keys) {
        PRow row;
        for (auto& [src, val] : features(key))
            row.terms.push_back(
                {{stage_off + 3,
                  pair_idx.at(std::make_tuple(src.stage, src.idx, encode_bits(val, f)))},
                 c.m_one});
        row.bias = c.one;
        oh_stage.rows.push_back(std::move(row));
    }
    pipe.stages.push_back(d_stage);
    pipe.stages.push_back(h_stage);
    pipe.stages.push_back(e_stage);
    pipe.stages.push_back(neq_stage);
    pipe.stages.push_back(oh_stage);
    for (int r = 0; r < t.val_dim; ++r) {
        PLinRow row;
        row.bias = c.zero;
        for (size_t k = 0; k < t.keys.size(); ++k)
            row.terms.emplace_back(static_cast<int>(k), t.vals[k][r]);
        pipe.outputs.push_back(std::move(row));
    }
    return pipe;
}

}  // namespace fpt
