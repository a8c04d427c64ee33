#pragma once

// Assembly of complete transformer models around the compiled gadgets:
// an order-detecting model that realizes any target equivariant under
// swapping the first two positions, and a counting model that realizes any
// target equivariant under all position permutations.
//
// Both models share the same shape: a one-hot feed-forward block writes
// per-position token flags into a scratch region, a uniform attention block
// sums the flags across positions into a second region, the flags are erased,
// and a memorizer keyed on (token, summed flags) produces the output.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fpt/constructions.hpp"
#include "fpt/pipeline.hpp"
#include "fpt/transformer.hpp"

namespace fpt {

// ---------------------------------------------------------------------------
// Alphabets and the triple catalog
// ---------------------------------------------------------------------------

inline void validate_alphabet(const std::vector<Fp>& alphabet, const FpFormat& f) {
    if (alphabet.empty()) throw std::invalid_argument("alphabet: empty");
    std::set<uint64_t> seen;
    for (const Fp& z : alphabet) {
        if (!fp_is_finite(z)) throw std::invalid_argument("alphabet: tokens must be finite");
        if (!seen.insert(encode_bits(z, f)).second)
            throw std::invalid_argument("alphabet: duplicate token");
    }
}

// All 3-element subsets of alphabet indices, in lexicographic order.  Each
// triple owns three flag slots, one per choice of trailing member.
struct TripleCatalog {
    std::vector<std::array<int, 3>> triples;

    static TripleCatalog make(int alphabet_size) {
        TripleCatalog c;
        for (int a = 0; a < alphabet_size; ++a)
            for (int b = a + 1; b < alphabet_size; ++b)
                for (int d = b + 1; d < alphabet_size; ++d) c.triples.push_back({a, b, d});
        return c;
    }
    int slot(int triple, int trailing_pos) const { return 3 * triple + trailing_pos; }
    int slot_count() const { return 3 * static_cast<int>(triples.size()); }
};

// ---------------------------------------------------------------------------
// Flag-writing and flag-summing blocks
// ---------------------------------------------------------------------------

namespace detail_asm {

// Pipeline computing an exact one-hot over the alphabet from the token at
// input 0, then writing weights[s][j] for token j into output slot s.
// The token passes through the injective encoder first so every compared
// value lies in [0, 2^emax] and no difference row can overflow to +inf
// (which an erase row could never cancel).
inline Pipeline token_flag_pipeline(const std::vector<Fp>& alphabet,
                                    const std::vector<std::vector<Fp>>& weights,
                                    const FpFormat& f) {
    auto c = detail_gadget::eq_consts(f);
    Pipeline pipe;
    pipe.d_in = 1;
    Fp one = fp_one(f), half = fp_pow2(-1, f), zero = fp_zero(f);
    Fp two = fp_from_int(2, f), m_one = fp_neg(one), m_two = fp_neg(two), m_half = fp_neg(half);
    PStage s0, s1;
    s0.rows = {{{{{-1, 0}, one}}, zero},
               {{{{-1, 0}, half}}, zero},
               {{{{-1, 0}, m_one}}, zero},
               {{{{-1, 0}, m_half}}, zero}};
    s1.rows = {{{{{0, 0}, one}, {{0, 1}, m_two}}, zero},
               {{{{0, 0}, m_one}, {{0, 1}, two}}, zero},
               {{{{0, 1}, one}}, zero},
               {{{{0, 2}, one}, {{0, 3}, m_two}}, zero},
               {{{{0, 2}, m_one}, {{0, 3}, two}}, zero},
               {{{{0, 3}, one}}, zero}};
    pipe.stages.push_back(std::move(s0));
    pipe.stages.push_back(std::move(s1));
    // Difference rows are shared between alphabet values with equal encoder
    // features; each value's collapse row reads all twelve of its rows.
    PStage d_stage, h_stage, e_stage;
    std::map<std::pair<int, uint64_t>, int> pair_base;
    for (size_t j = 0; j < alphabet.size(); ++j) {
        auto enc = encode_value(alphabet[j], f);
        std::vector<int> d_rows;
        for (int u = 0; u < 6; ++u) {
            auto pk = std::make_pair(u, encode_bits(enc[static_cast<size_t>(u)], f));
            auto it = pair_base.find(pk);
            if (it == pair_base.end())
                it = pair_base
                         .emplace(pk, detail_gadget::add_diff_rows(
                                          d_stage, {1, u}, enc[static_cast<size_t>(u)], f, c))
                         .first;
            d_rows.push_back(it->second);
            d_rows.push_back(it->second + 1);
        }
        detail_gadget::add_collapse_row(h_stage, 2, d_rows, c);
        detail_gadget::add_eq_row(e_stage, 3, static_cast<int>(j), c);
    }
    pipe.stages.push_back(std::move(d_stage));
    pipe.stages.push_back(std::move(h_stage));
    pipe.stages.push_back(std::move(e_stage));
    for (auto& row_w : weights) {
        if (row_w.size() != alphabet.size())
            throw std::invalid_argument("token_flag_pipeline: weight row size mismatch");
        PLinRow row;
        row.bias = c.zero;
        for (size_t j = 0; j < alphabet.size(); ++j)
            if (!fp_is_zero(row_w[j])) row.terms.emplace_back(static_cast<int>(j), row_w[j]);
        pipe.outputs.push_back(std::move(row));
    }
    return pipe;
}

// Attention head with zero scores (uniform softmax) that adds, to every
// column, the rounded left fold over positions of flag * alpha for each
// source coordinate, landing on the matching destination coordinate.
inline AttnParams sum_attention(int src_base, int dst_base, int count, int m, int d,
                                const FpFormat& f) {
    if (m < count) throw std::invalid_argument("sum_attention: m too small");
    AttnHead h{FpMatrix(m, d, f), FpMatrix(m, d, f), FpMatrix(m, d, f), FpMatrix(d, m, f)};
    Fp one = fp_one(f);
    for (int s = 0; s < count; ++s) {
        h.wv.set(s, src_base + s, one);
        h.wo.set(dst_base + s, s, one);
    }
    return AttnParams{{h}};
}

// Feed-forward block that zeroes a range of nonnegative coordinates.
inline SparseFf erase_coords(int base, int count, const FpFormat& f) {
    SparseFf ff;
    Fp one = fp_one(f), m_one = fp_neg(one), zero = fp_zero(f);
    for (int s = 0; s < count; ++s) {
        ff.rows.push_back({{{base + s, one}}, zero});
        ff.w2.push_back({base + s, s, m_one});
    }
    return ff;
}

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail_asm

// ---------------------------------------------------------------------------
// Targets and factorization
// ---------------------------------------------------------------------------

using TargetFn = std::function<FpMatrix(const FpMatrix&)>;

// Deterministic pseudorandom target, equivariant under swapping the first two
// positions by construction: the value of column i depends only on the
// sequence with its first two columns put in a canonical order, plus the
// token at position i.
inline TargetFn make_swap_equiv_target(uint64_t seed, int d_out, const FpFormat& f) {
    auto finite = enumerate_finite(f);
    return [seed, d_out, f, finite](const FpMatrix& x) {
        if (x.rows() != 1 || x.cols() < 2)
            throw std::invalid_argument("swap target: expected a token row, n >= 2");
        std::vector<uint64_t> bits;
        for (int i = 0; i < x.cols(); ++i) bits.push_back(encode_bits(x.at(0, i), f));
        if (bits[0] > bits[1]) std::swap(bits[0], bits[1]);
        uint64_t h0 = detail_asm::mix64(seed);
        for (uint64_t b : bits) h0 = detail_asm::mix64(h0 ^ b);
        FpMatrix y(d_out, x.cols(), f);
        for (int i = 0; i < x.cols(); ++i) {
            uint64_t hi = detail_asm::mix64(h0 ^ encode_bits(x.at(0, i), f));
            for (int r = 0; r < d_out; ++r) {
                hi = detail_asm::mix64(hi);
                y.set(r, i, finite[hi % finite.size()]);
            }
        }
        return y;
    };
}

// Deterministic pseudorandom target, equivariant under every position
// permutation: column i depends only on the multiset of tokens (as counts
// over the alphabet) and the token at position i.
inline TargetFn make_perm_equiv_target(uint64_t seed, int d_out, const std::vector<Fp>& alphabet,
                                       const FpFormat& f) {
    auto finite = enumerate_finite(f);
    return [seed, d_out, f, finite, alphabet](const FpMatrix& x) {
        auto counts = count_vector(x, alphabet);
        uint64_t h0 = detail_asm::mix64(seed ^ 0x5bf03635ULL);
        for (int c : counts) h0 = detail_asm::mix64(h0 ^ static_cast<uint64_t>(c));
        FpMatrix y(d_out, x.cols(), f);
        for (int i = 0; i < x.cols(); ++i) {
            uint64_t hi = detail_asm::mix64(h0 ^ encode_bits(x.at(0, i), f));
            for (int r = 0; r < d_out; ++r) {
                hi = detail_asm::mix64(hi);
                y.set(r, i, finite[hi % finite.size()]);
            }
        }
        return y;
    };
}

// Check f(X pi) == f(X) pi on the given inputs for the given generators.
inline bool check_equivariance(const TargetFn& target, const std::vector<FpMatrix>& domain,
                               const std::vector<Permutation>& gens, const FpFormat& f) {
    for (const FpMatrix& x : domain) {
        FpMatrix y = target(x);
        for (const Permutation& pi : gens)
            if (!mat_eq(target(permute_columns(x, pi, f)), permute_columns(y, pi, f)))
                return false;
    }
    return true;
}

// Tabulate target values keyed by (token at position i, key features of the
// whole sequence).  A key conflict means the target does not factor through
// the features, i.e. it lacks the claimed equivariance.
inline LookupTable factorize_target(
    const std::vector<FpMatrix>& domain, const TargetFn& target,
    const std::function<std::vector<Fp>(const FpMatrix&, int)>& keyfn, int d_out,
    const FpFormat& f) {
    LookupTable t;
    t.val_dim = d_out;
    std::map<std::vector<uint64_t>, size_t> index;
    for (const FpMatrix& x : domain) {
        FpMatrix y = target(x);
        if (y.rows() != d_out || y.cols() != x.cols())
            throw std::invalid_argument("factorize_target: target shape mismatch");
        for (int i = 0; i < x.cols(); ++i) {
            std::vector<Fp> key = keyfn(x, i);
            if (t.key_dim == 0) t.key_dim = static_cast<int>(key.size());
            std::vector<uint64_t> bits;
            for (const Fp& k : key) bits.push_back(encode_bits(k, f));
            std::vector<Fp> val;
            for (int r = 0; r < d_out; ++r) val.push_back(y.at(r, i));
            auto [it, fresh] = index.emplace(std::move(bits), t.keys.size());
            if (fresh) {
                t.keys.push_back(std::move(key));
                t.vals.push_back(std::move(val));
            } else {
                for (int r = 0; r < d_out; ++r)
                    if (!fp_eq(t.vals[it->second][static_cast<size_t>(r)], val[static_cast<size_t>(r)]))
                        throw std::logic_error(
                            "factorize_target: key conflict, target is not equivariant");
            }
        }
    }
    return t;
}

// All ordered n-tuples of distinct alphabet tokens, as 1 x n rows.
inline std::vector<FpMatrix> distinct_token_sequences(const std::vector<Fp>& alphabet, int n,
                                                      const FpFormat& f) {
    int sz = static_cast<int>(alphabet.size());
    if (n < 1 || n > sz) throw std::invalid_argument("distinct_token_sequences: bad n");
    long count = 1;
    for (int i = 0; i < n; ++i) count *= sz - i;
    if (count > 200000) throw std::invalid_argument("distinct_token_sequences: domain too large");
    std::vector<FpMatrix> out;
    std::vector<int> pick;
    std::vector<bool> used(static_cast<size_t>(sz), false);
    std::function<void()> rec = [&]() {
        if (static_cast<int>(pick.size()) == n) {
            FpMatrix x(1, n, f);
            for (int i = 0; i < n; ++i) x.set(0, i, alphabet[static_cast<size_t>(pick[static_cast<size_t>(i)])]);
            out.push_back(std::move(x));
            return;
        }
        for (int j = 0; j < sz; ++j)
            if (!used[static_cast<size_t>(j)]) {
                used[static_cast<size_t>(j)] = true;
                pick.push_back(j);
                rec();
                pick.pop_back();
                used[static_cast<size_t>(j)] = false;
            }
    };
    rec();
    return out;
}

// ---------------------------------------------------------------------------
// Full model assembly
// ---------------------------------------------------------------------------

struct BuildResult {
    TransformerModel model;
    TargetFn target;                // the realized target
    LookupTable table;              // memorized (token, flags) -> value entries
    std::vector<Fp> alphabet;
    int gamma = 0;                  // triples (ordering model) or tokens (counting model)
    int n = 0;
    // constants, as used by the flag blocks
    Fp alpha, beta, beta_prime, delta;  // beta_prime/delta only for the ordering model
    // dimension ledger
    int t_d = 0;  // stream width
    int prefix_blocks = 0;  // blocks up to and including the flag-summing attention
    int t_m = 0;  // attention rows
    int t_r = 0;  // hidden rows
};

namespace detail_asm {

// Shared skeleton: flag pipeline -> uniform attention sum -> erase -> memorizer.
inline BuildResult assemble_flag_model(const std::vector<Fp>& alphabet, int n, int flag_count,
                                       const std::vector<std::vector<Fp>>& flag_weights,
                                       const TargetFn& target,
                                       const std::vector<FpMatrix>& domain, int d_out,
                                       const FpFormat& f) {
    int a_base = 1, b_base = 1 + flag_count, scratch = 1 + 2 * flag_count;
    Pipeline g1 = token_flag_pipeline(alphabet, flag_weights, f);
    EmbedLayout lay_g1;
    lay_g1.input_coords = {0};
    for (int s = 0; s < flag_count; ++s) lay_g1.output_coords.push_back(a_base + s);
    lay_g1.scratch_base = scratch;
    lay_g1.erase_inputs = false;
    EmbeddedPipeline e_g1 = embed_pipeline(g1, lay_g1, f);

    // The flag-summing attention and the flag erase; then the memorizer keyed
    // on the token and the summed flags.
    struct Pending {
        SparseFf ff;
        bool has_attn = false;
    };
    std::vector<Pending> pend;
    for (auto& ff : e_g1.ffs) pend.push_back({ff, false});
    pend.push_back({erase_coords(a_base, flag_count, f), true});

    int width_prefix = std::max(e_g1.width, scratch);

    BuildResult res;
    res.alphabet = alphabet;
    res.n = n;
    res.target = target;

    // Factorize using a semantic flag computation (verified against the real
    // blocks by the tests): flags = rounded left fold over positions of
    // weight(token_i) * alpha.
    Fp alpha = uniform_softmax_value(n, f);
    auto token_index = [&](const Fp& tok) {
        for (size_t j = 0; j < alphabet.size(); ++j)
            if (fp_eq(tok, alphabet[j])) return static_cast<int>(j);
        throw std::invalid_argument("assemble: token not in alphabet");
    };
    auto flagfn = [&](const FpMatrix& x) {
        std::vector<Fp> flags(static_cast<size_t>(flag_count), fp_zero(f));
        for (int s = 0; s < flag_count; ++s) {
            Fp acc = fp_zero(f);
            for (int i = 0; i < x.cols(); ++i) {
                Fp w = flag_weights[static_cast<size_t>(s)][static_cast<size_t>(token_index(x.at(0, i)))];
                if (fp_is_zero(w)) continue;  // zero flag, exact no-op in the fold
                acc = fp_add(acc, fp_mul(w, alpha, f), f);
            }
            flags[static_cast<size_t>(s)] = acc;
        }
        return flags;
    };
    auto keyfn = [&](const FpMatrix& x, int i) {
        std::vector<Fp> key;
        key.push_back(x.at(0, i));
        for (Fp& v : flagfn(x)) key.push_back(v);
        return key;
    };
    res.table = factorize_target(domain, target, keyfn, d_out, f);

    // Flag coordinates are outputs of the summing attention and stay in
    // [0, 2^emax], so the memorizer compares them raw; only the token
    // coordinate goes through the injective encoder.
    std::vector<bool> bounded(static_cast<size_t>(1 + flag_count), true);
    bounded[0] = false;
    Pipeline psi = build_shared_memorizer(res.table, f, bounded);
    EmbedLayout lay_psi;
    lay_psi.input_coords = {0};
    for (int s = 0; s < flag_count; ++s) lay_psi.input_coords.push_back(b_base + s);
    for (int r = 0; r < d_out; ++r) lay_psi.output_coords.push_back(r);
    lay_psi.scratch_base = scratch;
    lay_psi.erase_inputs = true;
    EmbeddedPipeline e_psi = embed_pipeline(psi, lay_psi, f);
    for (auto& ff : e_psi.ffs) pend.push_back({ff, false});

    int d = std::max({width_prefix, e_psi.width, d_out});
    int r = 1;
    for (auto& p : pend) r = std::max(r, static_cast<int>(p.ff.rows.size()));
    int m = std::max(1, flag_count);

    TransformerModel model;
    model.fmt = f;
    model.w_in = FpMatrix(d, 1, f);
    model.w_in.set(0, 0, fp_one(f));
    model.b_in = FpMatrix(d, 1, f);
    for (auto& p : pend) {
        // Padding every block to the common hidden count r would be an exact
        // no-op (all-zero rows and columns); store each block unpadded and
        // report r in the dimension ledger only.
        int rb = std::max(1, static_cast<int>(p.ff.rows.size()));
        Block b{p.has_attn ? sum_attention(a_base, b_base, flag_count, m, d, f)
                           : identity_attention(m, d, f),
                materialize_ff(p.ff, rb, d, f)};
        model.blocks.push_back(std::move(b));
    }
    model.w_out = FpMatrix(d_out, d, f);
    for (int rr = 0; rr < d_out; ++rr) model.w_out.set(rr, rr, fp_one(f));
    model.b_out = FpMatrix(d_out, 1, f);

    res.model = std::move(model);
    res.alpha = alpha;
    res.prefix_blocks = static_cast<int>(e_g1.ffs.size()) + 1;
    res.t_d = d;
    res.t_m = m;
    res.t_r = r;
    return res;
}

}  // namespace detail_asm

// Flag weights for the order-detector blocks: one flag per (triple, trailing
// member); the trailing member contributes beta, the two leading members
// beta_prime, every other token zero.
inline std::vector<std::vector<Fp>> make_order_weights(const TripleCatalog& cat,
                                                       const OrderDetectorConfig& cfg,
                                                       int alphabet_size, const FpFormat& f) {
    std::vector<std::vector<Fp>> weights(
        static_cast<size_t>(cat.slot_count()),
        std::vector<Fp>(static_cast<size_t>(alphabet_size), fp_zero(f)));
    for (size_t ti = 0; ti < cat.triples.size(); ++ti)
        for (int m = 0; m < 3; ++m) {
            int s = cat.slot(static_cast<int>(ti), m);
            for (int pos = 0; pos < 3; ++pos) {
                int tok = cat.triples[ti][static_cast<size_t>(pos)];
                weights[static_cast<size_t>(s)][static_cast<size_t>(tok)] =
                    pos == m ? cfg.beta : cfg.beta_prime;
            }
        }
    return weights;
}

// The standalone flag prefix: blocks that read the token at coordinate 0 and
// leave the summed flags at coordinates [1, 1 + flag_count), everything else
// zero.  Used to observe flag values directly in tests.
struct FlagBlocks {
    std::vector<Block> blocks;
    int flag_count = 0;
    int b_base = 1;  // first flag coordinate after the blocks run
    int d = 0, m = 0, r = 0;
};

inline FlagBlocks build_flag_blocks(const std::vector<Fp>& alphabet,
                                    const std::vector<std::vector<Fp>>& flag_weights,
                                    const FpFormat& f) {
    int flag_count = static_cast<int>(flag_weights.size());
    int a_base = 1, b_base = 1 + flag_count, scratch = 1 + 2 * flag_count;
    Pipeline g1 = detail_asm::token_flag_pipeline(alphabet, flag_weights, f);
    EmbedLayout lay;
    lay.input_coords = {0};
    for (int s = 0; s < flag_count; ++s) lay.output_coords.push_back(a_base + s);
    lay.scratch_base = scratch;
    EmbeddedPipeline emb = embed_pipeline(g1, lay, f);
    FlagBlocks out;
    out.flag_count = flag_count;
    out.b_base = b_base;
    out.d = std::max(emb.width, scratch);
    out.m = std::max(1, flag_count);
    SparseFf erase = detail_asm::erase_coords(a_base, flag_count, f);
    out.r = static_cast<int>(erase.rows.size());
    for (auto& ff : emb.ffs) out.r = std::max(out.r, static_cast<int>(ff.rows.size()));
    for (auto& ff : emb.ffs)
        out.blocks.push_back({identity_attention(out.m, out.d, f),
                              materialize_ff(ff, out.r, out.d, f)});
    out.blocks.push_back({detail_asm::sum_attention(a_base, b_base, flag_count, out.m, out.d, f),
                          materialize_ff(erase, out.r, out.d, f)});
    return out;
}

// Model realizing a swap-equivariant target on ordered distinct token
// sequences: per-position order flags mark, for each triple and each choice
// of trailing member, whether the trailing member appears after both others.
inline BuildResult assemble_ordering_model(const std::vector<Fp>& alphabet, int n,
                                           const TargetFn& target, int d_out,
                                           const FpFormat& f) {
    validate_alphabet(alphabet, f);
    if (!wide_exponent_range(f))
        throw std::invalid_argument("assemble_ordering_model: format lacks wide exponent range");
    if (n < 2) throw std::invalid_argument("assemble_ordering_model: need n >= 2");
    auto cfg = make_order_detector_config(n, f);
    auto cat = TripleCatalog::make(static_cast<int>(alphabet.size()));
    int flag_count = cat.slot_count();
    auto weights = make_order_weights(cat, cfg, static_cast<int>(alphabet.size()), f);
    auto domain = distinct_token_sequences(alphabet, n, f);
    if (!check_equivariance(target, domain, {Permutation::swap2(n, 0, 1)}, f))
        throw std::logic_error("assemble_ordering_model: target is not swap-equivariant");
    BuildResult res = detail_asm::assemble_flag_model(alphabet, n, flag_count, weights, target,
                                                      domain, d_out, f);
    res.gamma = static_cast<int>(cat.triples.size());
    res.beta = cfg.beta;
    res.beta_prime = cfg.beta_prime;
    res.delta = cfg.delta;
    return res;
}

// Model realizing a permutation-equivariant target on the given inputs:
// per-token occurrence counters, summed by uniform attention.
inline BuildResult assemble_counting_model(const std::vector<Fp>& alphabet, int n,
                                           const TargetFn& target,
                                           const std::vector<FpMatrix>& domain, int d_out,
                                           const FpFormat& f) {
    validate_alphabet(alphabet, f);
    if (!wide_exponent_range(f))
        throw std::invalid_argument("assemble_counting_model: format lacks wide exponent range");
    auto cfg = make_counter_config(n, f);  // rejects n > 6*2^p - 2
    int flag_count = static_cast<int>(alphabet.size());
    std::vector<std::vector<Fp>> weights(
        static_cast<size_t>(flag_count), std::vector<Fp>(alphabet.size(), fp_zero(f)));
    for (int j = 0; j < flag_count; ++j)
        weights[static_cast<size_t>(j)][static_cast<size_t>(j)] = cfg.beta;
    for (const FpMatrix& x : domain)
        if (x.rows() != 1 || x.cols() != n)
            throw std::invalid_argument("assemble_counting_model: domain shape mismatch");
    if (n >= 2) {
        std::vector<Permutation> gens = {Permutation::swap2(n, 0, 1), Permutation::cycle(n)};
        if (!check_equivariance(target, domain, gens, f))
            throw std::logic_error("assemble_counting_model: target is not permutation-equivariant");
    }
    BuildResult res = detail_asm::assemble_flag_model(alphabet, n, flag_count, weights, target,
                                                      domain, d_out, f);
    res.gamma = flag_count;
    res.beta = cfg.beta;
    res.beta_prime = fp_zero(f);
    res.delta = fp_zero(f);
    return res;
}

}  // namespace fpt
