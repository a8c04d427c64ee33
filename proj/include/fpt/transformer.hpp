#pragma once

#include <stdexcept>
#include <vector>

#include "fpt/arith.hpp"
#include "fpt/fp.hpp"
#include "fpt/format.hpp"
#include "fpt/matrix.hpp"

namespace fpt {

// max that absorbs NaN (any NaN input makes the max NaN)
inline Fp fp_max_of(std::span<const Fp> xs) {
    if (xs.empty()) throw std::invalid_argument("fp_max_of: empty");
    for (const Fp& x : xs)
        if (fp_is_nan(x)) return fp_nan();
    Fp best = xs[0];
    for (size_t i = 1; i < xs.size(); ++i)
        if (fp_cmp(xs[i], best) > 0) best = xs[i];
    return best;
}

// Column-wise softmax with max subtraction:
//   s_i = exp(x_i - x_*) / leftsum_j exp(x_j - x_*)
// Every op is a rounded minifloat op.  A NaN or +inf anywhere in a column,
// or a column of all -inf, propagates to a column of NaN through the op
// tables; no special-casing is needed.  The division contract holds because
// each numerator is one term of the nonnegative left sum, and rounded
// addition of nonnegative terms never moves the accumulator down.
inline FpMatrix softmax_col(const FpMatrix& x, const FpFormat& f) {
    FpMatrix r(x.rows(), x.cols(), f);
    std::vector<Fp> col(static_cast<size_t>(x.rows()));
    std::vector<Fp> ex(static_cast<size_t>(x.rows()));
    for (int j = 0; j < x.cols(); ++j) {
        for (int i = 0; i < x.rows(); ++i) col[static_cast<size_t>(i)] = x.at(i, j);
        Fp m = fp_max_of(col);
        for (int i = 0; i < x.rows(); ++i)
            ex[static_cast<size_t>(i)] = rounded_exp(fp_sub(col[static_cast<size_t>(i)], m, f), f);
        Fp denom = left_sum(ex, f);
        for (int i = 0; i < x.rows(); ++i) {
            const Fp& e = ex[static_cast<size_t>(i)];
            if (fp_is_nan(denom)) {
                r.set(i, j, fp_nan());
            } else {
                r.set(i, j, fp_div(e, denom, f));
            }
        }
    }
    return r;
}

struct FfParams {
    FpMatrix w1, b1;  // r x d, r x 1
    FpMatrix w2, b2;  // d x r, d x 1
};

struct AttnHead {
    FpMatrix wq, wk, wv;  // m x d
    FpMatrix wo;          // d x m
};

struct AttnParams {
    std::vector<AttnHead> heads;
};

struct Block {
    AttnParams attn;
    FfParams ff;
};

struct TransformerModel {
    FpFormat fmt;
    FpMatrix w_in, b_in;    // d x d_in, d x 1
    std::vector<Block> blocks;
    FpMatrix w_out, b_out;  // d_out x d, d_out x 1
};

// X + (W2 * relu(W1 * X + b1 1^T) + b2 1^T)
inline FpMatrix ff_forward(const FfParams& p, const FpMatrix& x, const FpFormat& f) {
    FpMatrix h = mat_relu(add_bias(mat_mul(p.w1, x, f), p.b1, f), f);
    FpMatrix y = add_bias(mat_mul(p.w2, h, f), p.b2, f);
    return mat_add(x, y, f);
}

// X + leftsum_i WO_i * (V_i * softmax(K_i^T * Q_i)), with Q/K/V = W{q,k,v} X
inline FpMatrix attn_forward(const AttnParams& p, const FpMatrix& x, const FpFormat& f) {
    if (p.heads.empty()) throw std::invalid_argument("attn_forward: no heads");
    FpMatrix acc;
    bool first = true;
    for (const AttnHead& h : p.heads) {
        FpMatrix q = mat_mul(h.wq, x, f);
        FpMatrix k = mat_mul(h.wk, x, f);
        FpMatrix v = mat_mul(h.wv, x, f);
        FpMatrix s = softmax_col(mat_mul(transpose(k, f), q, f), f);
        FpMatrix out = mat_mul(h.wo, mat_mul(v, s, f), f);
        acc = first ? out : mat_add(acc, out, f);
        first = false;
    }
    return mat_add(x, acc, f);
}

inline FpMatrix block_forward(const Block& b, const FpMatrix& x, const FpFormat& f) {
    return ff_forward(b.ff, attn_forward(b.attn, x, f), f);
}

inline FpMatrix stack_forward(const std::vector<Block>& blocks, const FpMatrix& x,
                              const FpFormat& f) {
    FpMatrix y = x;
    for (const Block& b : blocks) y = block_forward(b, y, f);
    return y;
}

// W_out * g(W_in * X + b_in 1^T) + b_out 1^T
inline FpMatrix model_forward(const TransformerModel& m, const FpMatrix& x) {
    const FpFormat& f = m.fmt;
    FpMatrix h = add_bias(mat_mul(m.w_in, x, f), m.b_in, f);
    h = stack_forward(m.blocks, h, f);
    return add_bias(mat_mul(m.w_out, h, f), m.b_out, f);
}

inline bool col_eq(const FpMatrix& x, int a, const FpMatrix& y, int b) {
    if (x.rows() != y.rows()) return false;
    for (int i = 0; i < x.rows(); ++i)
        if (!fp_eq(x.at(i, a), y.at(i, b))) return false;
    return true;
}

// X and Y are (a,b)-similar when, for some columns z1 and z2,
//   X = [ z1 x a     | z2 x (b-a)   | tail ]
//   Y = [ z1 x (a-1) | z2 x (b-a+1) | tail ]
// with the same tail.  a and b are 1-based positions, 1 <= a < b <= n.
inline bool is_ab_similar(const FpMatrix& x, const FpMatrix& y, int a, int b) {
    int n = x.cols();
    if (y.cols() != n || y.rows() != x.rows()) return false;
    if (a < 1 || a >= b || b > n) throw std::invalid_argument("is_ab_similar: need 1 <= a < b <= n");
    // z1 is X's first column; z2 is Y's column a (which is nonempty even when a == b)
    for (int j = 1; j < a; ++j)
        if (!col_eq(x, j, x, 0)) return false;  // X columns 1..a are z1
    for (int j = 0; j < a - 1; ++j)
        if (!col_eq(y, j, x, 0)) return false;  // Y columns 1..a-1 are z1
    for (int j = a - 1; j < b; ++j)
        if (!col_eq(y, j, y, a - 1)) return false;  // Y columns a..b are z2
    for (int j = a; j < b; ++j)
        if (!col_eq(x, j, y, a - 1)) return false;  // X columns a+1..b are z2
    for (int j = b; j < n; ++j)
        if (!col_eq(x, j, y, j)) return false;  // identical tails
    return true;
}

// all columns pairwise distinct
inline bool is_distinct_tokens(const FpMatrix& x) {
    for (int i = 0; i < x.cols(); ++i)
        for (int j = i + 1; j < x.cols(); ++j)
            if (col_eq(x, i, x, j)) return false;
    return true;
}

}  // namespace fpt
