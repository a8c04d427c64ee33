#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fpt/arith.hpp"
#include "fpt/fp.hpp"
#include "fpt/format.hpp"

namespace fpt {

// Packed 8-byte entry: [cls:2][sign:1][biased exp:16][sig:45].
// make_format guarantees p <= 45 - 5 and |exp| < 2^15 fit.
inline uint64_t pack_fp(const Fp& x) {
    uint64_t cls = static_cast<uint64_t>(x.cls);
    uint64_t s = x.sign < 0 ? 1 : 0;
    uint64_t e = static_cast<uint64_t>(static_cast<uint32_t>(x.exp + 32768)) & 0xffff;
    uint64_t m = static_cast<uint64_t>(x.sig) & ((uint64_t{1} << 45) - 1);
    return (cls << 62) | (s << 61) | (e << 45) | m;
}

inline Fp unpack_fp(uint64_t w) {
    Fp x;
    x.cls = static_cast<FpClass>(w >> 62);
    x.sign = (w >> 61) & 1 ? -1 : 1;
    x.exp = static_cast<int32_t>(static_cast<int64_t>((w >> 45) & 0xffff) - 32768);
    x.sig = static_cast<int64_t>(w & ((uint64_t{1} << 45) - 1));
    return x;
}

class FpMatrix {
  public:
    // Nonzero entries per row, used by mat_mul's fast path.  Built lazily and
    // discarded on any write.
    struct SparseRows {
        std::vector<size_t> start;  // rows+1 offsets into col/val
        std::vector<int> col;
        std::vector<uint64_t> val;
    };

    FpMatrix() = default;
    FpMatrix(int rows, int cols, const FpFormat& f)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, pack_fp(fp_zero(f))) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("FpMatrix: negative shape");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    Fp at(int i, int j) const { return unpack_fp(raw(i, j)); }
    void set(int i, int j, const Fp& v) { raw(i, j) = pack_fp(v); }

    uint64_t& raw(int i, int j) {
        check(i, j);
        sparse_.reset();
        return data_[static_cast<size_t>(i) * cols_ + j];
    }
    uint64_t raw(int i, int j) const {
        check(i, j);
        return data_[static_cast<size_t>(i) * cols_ + j];
    }

    const uint64_t* row_ptr(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }

    const SparseRows& sparse_rows(uint64_t packed_zero) const {
        if (!sparse_) {
            auto sp = std::make_shared<SparseRows>();
            sp->start.resize(static_cast<size_t>(rows_) + 1, 0);
            for (int i = 0; i < rows_; ++i) {
                const uint64_t* row = data_.data() + static_cast<size_t>(i) * cols_;
                for (int k = 0; k < cols_; ++k)
                    if (row[k] != packed_zero) {
                        sp->col.push_back(k);
                        sp->val.push_back(row[k]);
                    }
                sp->start[static_cast<size_t>(i) + 1] = sp->col.size();
            }
            sparse_ = std::move(sp);
        }
        return *sparse_;
    }

  private:
    void check(int i, int j) const {
        if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
            throw std::out_of_range("FpMatrix: index out of range");
    }
    int rows_ = 0, cols_ = 0;
    std::vector<uint64_t> data_;
    mutable std::shared_ptr<const SparseRows> sparse_;
};

inline bool mat_eq(const FpMatrix& a, const FpMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (!fp_eq(a.at(i, j), b.at(i, j))) return false;
    return true;
}

inline FpMatrix mat_add(const FpMatrix& a, const FpMatrix& b, const FpFormat& f) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("mat_add: shape mismatch");
    FpMatrix r(a.rows(), a.cols(), f);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) r.set(i, j, fp_add(a.at(i, j), b.at(i, j), f));
    return r;
}

// (A*B)_ij = left_sum over k of A_ik * B_kj, folded in k order.  Since
// 0 + x = x for every class x (finite, infinite, NaN) the fold may start
// from an accumulator of zero, and terms where one factor is zero and the
// other finite contribute exactly zero and are skipped.
//
// When every entry of a column of B is finite, each zero entry of A is
// skipped by that rule, so the fold visits exactly A's nonzero entries in k
// order; the sparse row index then yields the identical fold cheaply.
// Columns containing an infinity or NaN fall back to the dense loop.
inline FpMatrix mat_mul(const FpMatrix& a, const FpMatrix& b, const FpFormat& f) {
    if (a.cols() != b.rows()) throw std::invalid_argument("mat_mul: shape mismatch");
    FpMatrix r(a.rows(), b.cols(), f);
    const uint64_t pz = pack_fp(fp_zero(f));
    auto finite = [](uint64_t w) { return (w >> 62) == 0; };
    const auto& sp = a.sparse_rows(pz);
    const uint64_t* bd = b.rows() > 0 ? b.row_ptr(0) : nullptr;
    const size_t bc = static_cast<size_t>(b.cols());
    for (int j = 0; j < b.cols(); ++j) {
        bool col_finite = true;
        for (int k = 0; k < b.rows(); ++k)
            if (!finite(bd[static_cast<size_t>(k) * bc + j])) {
                col_finite = false;
                break;
            }
        for (int i = 0; i < a.rows(); ++i) {
            Fp acc = fp_zero(f);
            if (col_finite) {
                for (size_t t = sp.start[static_cast<size_t>(i)];
                     t < sp.start[static_cast<size_t>(i) + 1]; ++t) {
                    uint64_t wa = sp.val[t];
                    uint64_t wb = bd[static_cast<size_t>(sp.col[t]) * bc + j];
                    if (wb == pz && finite(wa)) continue;
                    acc = fp_add(acc, fp_mul(unpack_fp(wa), unpack_fp(wb), f), f);
                }
            } else {
                const uint64_t* arow = a.row_ptr(i);
                for (int k = 0; k < a.cols(); ++k) {
                    uint64_t wa = arow[k];
                    uint64_t wb = bd[static_cast<size_t>(k) * bc + j];
                    if ((wa == pz && finite(wb)) || (wb == pz && finite(wa))) continue;
                    acc = fp_add(acc, fp_mul(unpack_fp(wa), unpack_fp(wb), f), f);
                }
            }
            r.set(i, j, acc);
        }
    }
    return r;
}

// X + b * 1_n^T: add a column vector to every column.
inline FpMatrix add_bias(const FpMatrix& x, const FpMatrix& bias, const FpFormat& f) {
    if (bias.cols() != 1 || bias.rows() != x.rows())
        throw std::invalid_argument("add_bias: bias must be rows x 1");
    FpMatrix r(x.rows(), x.cols(), f);
    for (int i = 0; i < x.rows(); ++i) {
        Fp bi = bias.at(i, 0);
        for (int j = 0; j < x.cols(); ++j) r.set(i, j, fp_add(x.at(i, j), bi, f));
    }
    return r;
}

// b * 1^T: repeat a d x 1 column vector across n columns.
inline FpMatrix broadcast_bias(const FpMatrix& bias, int n, const FpFormat& f) {
    if (bias.cols() != 1) throw std::invalid_argument("broadcast_bias: bias must be d x 1");
    FpMatrix r(bias.rows(), n, f);
    for (int i = 0; i < bias.rows(); ++i)
        for (int j = 0; j < n; ++j) r.raw(i, j) = bias.raw(i, 0);
    return r;
}

inline FpMatrix transpose(const FpMatrix& x, const FpFormat& f) {
    FpMatrix r(x.cols(), x.rows(), f);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) r.raw(j, i) = x.raw(i, j);
    return r;
}

inline FpMatrix map_entries(const FpMatrix& x, const FpFormat& f, Fp (*fn)(const Fp&, const FpFormat&)) {
    FpMatrix r(x.rows(), x.cols(), f);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) r.set(i, j, fn(x.at(i, j), f));
    return r;
}

inline FpMatrix mat_relu(const FpMatrix& x, const FpFormat& f) {
    return map_entries(x, f, rounded_relu);
}

// ---- column permutations ----

struct Permutation {
    std::vector<int> map;  // map[i] = pi(i)

    static Permutation identity(int n) {
        Permutation p;
        p.map.resize(static_cast<size_t>(n));
        std::iota(p.map.begin(), p.map.end(), 0);
        return p;
    }
    static Permutation swap2(int n, int i, int j) {
        Permutation p = identity(n);
        std::swap(p.map.at(static_cast<size_t>(i)), p.map.at(static_cast<size_t>(j)));
        return p;
    }
    // i -> i+1 mod n
    static Permutation cycle(int n) {
        Permutation p;
        p.map.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) p.map[static_cast<size_t>(i)] = (i + 1) % n;
        return p;
    }
    int size() const { return static_cast<int>(map.size()); }
    int operator()(int i) const { return map.at(static_cast<size_t>(i)); }

    // (a then b): composed(i) = b(a(i))
    Permutation then(const Permutation& b) const {
        Permutation r;
        r.map.reserve(map.size());
        for (int v : map) r.map.push_back(b(v));
        return r;
    }
    Permutation inverse() const {
        Permutation r;
        r.map.assign(map.size(), 0);
        for (int i = 0; i < size(); ++i) r.map[static_cast<size_t>((*this)(i))] = i;
        return r;
    }
};

// Column i of the result is column pi(i) of x... i.e. (X pi)_ij = X_{i, pi(j)}.
inline FpMatrix permute_columns(const FpMatrix& x, const Permutation& pi, const FpFormat& f) {
    if (pi.size() != x.cols()) throw std::invalid_argument("permute_columns: size mismatch");
    FpMatrix r(x.rows(), x.cols(), f);
    for (int j = 0; j < x.cols(); ++j) {
        int src = pi(j);
        for (int i = 0; i < x.rows(); ++i) r.raw(i, j) = x.raw(i, src);
    }
    return r;
}

}  // namespace fpt
