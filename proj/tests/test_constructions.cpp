#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "fpt/assemble.hpp"
#include "fpt/constructions.hpp"
#include "fpt/pipeline.hpp"

using namespace fpt;

namespace {

// Embed a pipeline into feed-forward blocks with identity attention and run
// it on a batch of input columns.  Inputs sit at coords [0, d_in), outputs at
// [d_in, d_in + n_out).  Checks that the blocks leave everything else zero.
FpMatrix eval_embedded(const Pipeline& pipe, const std::vector<std::vector<Fp>>& batch,
                       const FpFormat& f) {
    int d_in = pipe.d_in, n_out = static_cast<int>(pipe.outputs.size());
    EmbedLayout lay;
    for (int i = 0; i < d_in; ++i) lay.input_coords.push_back(i);
    for (int r = 0; r < n_out; ++r) lay.output_coords.push_back(d_in + r);
    lay.scratch_base = d_in + n_out;
    lay.erase_inputs = true;
    EmbeddedPipeline e = embed_pipeline(pipe, lay, f);
    int n = static_cast<int>(batch.size());
    FpMatrix x(e.width, n, f);
    for (int j = 0; j < n; ++j) {
        REQUIRE(static_cast<int>(batch[j].size()) == d_in);
        for (int i = 0; i < d_in; ++i) x.set(i, j, batch[j][i]);
    }
    std::vector<Block> blocks;
    for (auto& ff : e.ffs)
        blocks.push_back({identity_attention(1, e.width, f),
                          materialize_ff(ff, static_cast<int>(ff.rows.size()), e.width, f)});
    FpMatrix y = stack_forward(blocks, x, f);
    FpMatrix out(n_out, n, f);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < e.width; ++i) {
            if (i >= d_in && i < d_in + n_out) {
                out.set(i - d_in, j, y.at(i, j));
            } else {
                INFO("leftover at coord " << i << " col " << j);
                CHECK(fp_is_zero(y.at(i, j)));
            }
        }
    return out;
}

std::vector<Fp> col_of(const FpMatrix& m, int j) {
    std::vector<Fp> v;
    for (int i = 0; i < m.rows(); ++i) v.push_back(m.at(i, j));
    return v;
}

}  // namespace

TEST_CASE("uniform softmax value") {
    auto f = make_format(2, 4);
    CHECK(fp_eq(uniform_softmax_value(3, f), parse_fp("0.3125", f)));
    CHECK(fp_eq(uniform_softmax_value(1, f), fp_one(f)));
    // the rounded sum of 16 ones saturates at 8, so the weight is 1/8
    CHECK(fp_eq(uniform_softmax_value(16, f), parse_fp("0.125", f)));
    // it matches what softmax actually produces on a zero score column
    for (int n : {2, 3, 5, 16}) {
        FpMatrix scores(n, 1, f);
        FpMatrix s = softmax_col(scores, f);
        for (int i = 0; i < n; ++i) CHECK(fp_eq(s.at(i, 0), uniform_softmax_value(n, f)));
    }
}

TEST_CASE("multiplier solver") {
    auto f = make_format(2, 4);
    Fp alpha = parse_fp("0.3125", f);
    CHECK(fp_eq(solve_mul_target(alpha, fp_one(f), f), parse_fp("3", f)));
    CHECK(fp_eq(solve_mul_target(alpha, parse_fp("1.25", f), f), parse_fp("4", f)));
    CHECK(fp_eq(solve_mul_target(parse_fp("1.25", f), fp_one(f), f), parse_fp("0.75", f)));
    CHECK_THROWS_AS(solve_mul_target(fp_zero(f), fp_one(f), f), std::logic_error);
}

TEST_CASE("order detector constants") {
    auto f = make_format(2, 4);
    auto c = make_order_detector_config(3, f);
    CHECK(fp_eq(c.alpha, parse_fp("0.3125", f)));
    CHECK(fp_eq(c.beta, parse_fp("3", f)));
    CHECK(fp_eq(c.beta_prime, parse_fp("4", f)));
    CHECK(fp_eq(c.delta, parse_fp("3.5", f)));
    CHECK(fp_eq(fp_mul(c.beta, c.alpha, f), fp_one(f)));
    CHECK(fp_eq(fp_mul(c.beta_prime, c.alpha, f), fp_succ(fp_one(f), f)));

    // at p >= 3 the products target succ(1) and succ(succ(1))
    for (int n : {3, 5}) {
        auto f3 = make_format(3, 4);
        auto c3 = make_order_detector_config(n, f3);
        CHECK(fp_eq(fp_mul(c3.beta, c3.alpha, f3), fp_one_plus(f3)));
        CHECK(fp_eq(fp_mul(c3.beta_prime, c3.alpha, f3), fp_succ(fp_one_plus(f3), f3)));
        // delta marks only the arrangement (leading, leading, trailing)
        Fp tl = fp_mul(c3.beta, c3.alpha, f3), th = fp_mul(c3.beta_prime, c3.alpha, f3);
        CHECK(fp_eq(c3.delta, fp_add(fp_add(th, th, f3), tl, f3)));
        CHECK_FALSE(fp_eq(c3.delta, fp_add(fp_add(tl, th, f3), th, f3)));
        CHECK_FALSE(fp_eq(c3.delta, fp_add(fp_add(th, tl, f3), th, f3)));
    }
}

TEST_CASE("counter readings and closed form") {
    for (int p : {2, 3}) {
        auto f = make_format(p, 5);
        Fp acc = fp_zero(f);
        for (int k = 0; k < 40; ++k) {
            INFO("p=" << p << " k=" << k);
            CHECK(fp_eq(acc, sum_of_one_plus(k, f)));
            acc = fp_add(acc, fp_one_plus(f), f);
        }
        // saturation value and the number of distinct readings
        int md = 3 * (1 << p) - 1;
        std::set<uint64_t> seen;
        for (int k = 0; k < md; ++k) seen.insert(encode_bits(sum_of_one_plus(k, f), f));
        CHECK(static_cast<int>(seen.size()) == md);
        CHECK(fp_eq(sum_of_one_plus(md, f), fp_pow2(p + 2, f)));
        CHECK(fp_eq(sum_of_one_plus(md + 7, f), fp_pow2(p + 2, f)));
    }
    auto f = make_format(2, 4);
    auto cfg = make_counter_config(5, f);
    const char* expect[] = {"0", "1.25", "2.5", "4", "5", "6"};
    REQUIRE(cfg.flag_values.size() == 6);
    for (int k = 0; k <= 5; ++k) CHECK(fp_eq(cfg.flag_values[k], parse_fp(expect[k], f)));
    CHECK(cfg.max_distinct == 11);
    CHECK(fp_eq(cfg.saturation, parse_fp("16", f)));
    CHECK_THROWS_AS(make_counter_config(23, f), std::invalid_argument);
    CHECK_NOTHROW(make_counter_config(22, f));
}

TEST_CASE("count recovery from readings") {
    auto f = make_format(2, 4);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng() % 22);
        int tokens = 2 + static_cast<int>(rng() % 5);
        std::vector<int> counts(tokens, 0);
        for (int i = 0; i < n; ++i) ++counts[rng() % tokens];
        std::vector<Fp> flags;
        for (int c : counts) flags.push_back(sum_of_one_plus(c, f));
        CHECK(counts_from_flags(flags, n, f) == counts);
    }
    // two saturated counters can only mean 11 + 11 at n = 22
    std::vector<Fp> two_sat = {parse_fp("16", f), parse_fp("16", f), fp_zero(f)};
    CHECK(counts_from_flags(two_sat, 22, f) == std::vector<int>({11, 11, 0}));
    CHECK_THROWS_AS(counts_from_flags(two_sat, 21, f), std::invalid_argument);
    std::vector<Fp> bad = {parse_fp("3", f)};  // 3 is not a counter reading
    CHECK_THROWS_AS(counts_from_flags(bad, 2, f), std::invalid_argument);
}

TEST_CASE("three-max signatures split permutations into swap pairs") {
    for (int n : {2, 3, 4}) {
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        std::map<std::vector<int>, std::vector<std::vector<int>>> classes;
        do {
            Permutation pi{perm};
            classes[three_max_signature(pi)].push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (auto& [sig, members] : classes) {
            if (n == 2) {
                CHECK(members.size() == 2);  // no triples: the whole of S_2
                continue;
            }
            REQUIRE(members.size() == 2);
            // the two members differ by relabeling values 0 and 1
            std::vector<int> relabeled = members[0];
            for (int& v : relabeled) {
                if (v == 0) v = 1;
                else if (v == 1) v = 0;
            }
            CHECK(relabeled == members[1]);
        }
    }
}

TEST_CASE("injective encoder") {
    auto f = make_format(2, 4);
    auto fin = enumerate_finite(f);
    // direct semantics: injective, nonnegative, bounded by 2^emax
    std::set<std::vector<uint64_t>> images;
    Fp bound = fp_pow2(f.emax, f);
    for (const Fp& x : fin) {
        auto e = encode_value(x, f);
        std::vector<uint64_t> bits;
        for (const Fp& v : e) {
            CHECK(fp_is_finite(v));
            CHECK(fp_cmp(v, fp_zero(f)) >= 0);
            CHECK(fp_cmp(v, bound) <= 0);
            bits.push_back(encode_bits(v, f));
        }
        CHECK(images.insert(bits).second);
    }
    // the embedded pipeline computes exactly encode_value, for all inputs
    Pipeline pipe = build_injective_encoder(1, f);
    std::vector<std::vector<Fp>> batch;
    for (const Fp& x : fin) batch.push_back({x});
    FpMatrix out = eval_embedded(pipe, batch, f);
    for (size_t j = 0; j < fin.size(); ++j) {
        auto e = encode_value(fin[j], f);
        for (int r = 0; r < 6; ++r) CHECK(fp_eq(out.at(r, static_cast<int>(j)), e[r]));
    }
}

TEST_CASE("identity through paired relu rows") {
    auto f = make_format(2, 4);
    Pipeline pipe;
    pipe.d_in = 1;
    Fp one = fp_one(f), zero = fp_zero(f);
    pipe.stages.push_back({{{{{{-1, 0}, one}}, zero}, {{{{-1, 0}, fp_neg(one)}}, zero}}});
    pipe.outputs.push_back({{{0, one}, {1, fp_neg(one)}}, zero});
    std::vector<std::vector<Fp>> batch;
    for (const Fp& x : enumerate_finite(f)) batch.push_back({x});
    FpMatrix out = eval_embedded(pipe, batch, f);
    for (int j = 0; j < out.cols(); ++j) CHECK(fp_eq(out.at(0, j), batch[j][0]));
}

TEST_CASE("equality indicator") {
    auto f = make_format(2, 4);
    auto fin = enumerate_finite(f);
    // single encoder-range coordinate, exhaustive over [0, 2^emax]
    std::vector<std::vector<Fp>> batch;
    Fp bound = fp_pow2(f.emax, f);
    for (const Fp& x : fin)
        if (fp_cmp(x, fp_zero(f)) >= 0 && fp_cmp(x, bound) <= 0) batch.push_back({x});
    for (const char* key : {"0", "1", "128", "0.00390625"}) {
        Fp k = parse_fp(key, f);
        FpMatrix out = eval_embedded(build_indicator({k}, f), batch, f);
        for (size_t j = 0; j < batch.size(); ++j) {
            INFO("key " << key << " input " << to_decimal(batch[j][0], f));
            CHECK(fp_eq(out.at(0, static_cast<int>(j)),
                        fp_eq(batch[j][0], k) ? fp_one(f) : fp_zero(f)));
        }
    }
    // keyed on the encoder image of a token, exhaustive over all encoder
    // images: matches exactly the one token, by injectivity
    Fp tok = parse_fp("-2.5", f);
    auto enc_key = encode_value(tok, f);
    std::vector<Fp> key6(enc_key.begin(), enc_key.end());
    std::vector<std::vector<Fp>> batch6;
    for (const Fp& x : fin) {
        auto e = encode_value(x, f);
        batch6.push_back(std::vector<Fp>(e.begin(), e.end()));
    }
    FpMatrix out6 = eval_embedded(build_indicator(key6, f), batch6, f);
    for (size_t j = 0; j < fin.size(); ++j)
        CHECK(fp_eq(out6.at(0, static_cast<int>(j)),
                    fp_eq(fin[j], tok) ? fp_one(f) : fp_zero(f)));
    // keys outside the encoder range are rejected
    CHECK_THROWS_AS(build_indicator({fp_pinf()}, f), std::invalid_argument);
    CHECK_THROWS_AS(build_indicator({parse_fp("-1", f)}, f), std::invalid_argument);
    CHECK_THROWS_AS(build_indicator({parse_fp("224", f)}, f), std::invalid_argument);
}

TEST_CASE("memorizer with per-key indicators") {
    auto f = make_format(2, 4);
    auto fin = enumerate_finite(f);
    LookupTable t;
    t.key_dim = 1;
    t.val_dim = 2;
    t.keys = {{parse_fp("1", f)}, {parse_fp("-1.5", f)}, {parse_fp("0", f)}, {parse_fp("96", f)}};
    t.vals = {{parse_fp("2.5", f), parse_fp("-224", f)},
              {fp_zero(f), parse_fp("0.015625", f)},
              {parse_fp("-7", f), parse_fp("7", f)},
              {parse_fp("1", f), parse_fp("1", f)}};
    std::vector<std::vector<Fp>> batch;
    for (const Fp& x : fin) batch.push_back({x});
    FpMatrix out = eval_embedded(build_memorizer(t, f), batch, f);
    for (size_t j = 0; j < fin.size(); ++j) {
        int hit = -1;
        for (size_t k = 0; k < t.keys.size(); ++k)
            if (fp_eq(fin[j], t.keys[k][0])) hit = static_cast<int>(k);
        for (int r = 0; r < 2; ++r) {
            Fp want = hit >= 0 ? t.vals[static_cast<size_t>(hit)][static_cast<size_t>(r)] : fp_zero(f);
            INFO("input " << to_decimal(fin[j], f) << " row " << r);
            CHECK(fp_eq(out.at(r, static_cast<int>(j)), want));
        }
    }
    // duplicate keys and non-finite values are rejected
    LookupTable dup = t;
    dup.keys[1] = dup.keys[0];
    CHECK_THROWS_AS(build_memorizer(dup, f), std::invalid_argument);
    LookupTable inf_val = t;
    inf_val.vals[0][0] = fp_pinf();
    CHECK_THROWS_AS(build_memorizer(inf_val, f), std::invalid_argument);
}

TEST_CASE("memorizer of the full identity table") {
    auto f = make_format(2, 4);
    auto fin = enumerate_finite(f);
    LookupTable t;
    t.key_dim = 1;
    t.val_dim = 1;
    for (const Fp& x : fin) {
        t.keys.push_back({x});
        t.vals.push_back({x});
    }
    std::vector<std::vector<Fp>> batch;
    for (const Fp& x : fin) batch.push_back({x});
    FpMatrix out = eval_embedded(build_memorizer(t, f), batch, f);
    for (size_t j = 0; j < fin.size(); ++j)
        CHECK(fp_eq(out.at(0, static_cast<int>(j)), fin[j]));
}

TEST_CASE("shared-gadget memorizer") {
    auto f = make_format(2, 4);
    auto fin = enumerate_finite(f);
    std::mt19937_64 rng(3);
    LookupTable t;
    t.key_dim = 3;
    t.val_dim = 2;
    std::set<std::vector<uint64_t>> used;
    while (t.keys.size() < 40) {
        std::vector<Fp> key = {fin[rng() % fin.size()], fin[rng() % fin.size()],
                               fin[rng() % fin.size()]};
        std::vector<uint64_t> bits;
        for (auto& k : key) bits.push_back(encode_bits(k, f));
        if (!used.insert(bits).second) continue;
        t.keys.push_back(key);
        t.vals.push_back({fin[rng() % fin.size()], fin[rng() % fin.size()]});
    }
    std::vector<std::vector<Fp>> batch = t.keys;  // all hits
    for (int miss = 0; miss < 200; ++miss)       // and mostly misses
        batch.push_back({fin[rng() % fin.size()], fin[rng() % fin.size()], fin[rng() % fin.size()]});
    FpMatrix out = eval_embedded(build_shared_memorizer(t, f), batch, f);
    for (size_t j = 0; j < batch.size(); ++j) {
        int hit = -1;
        for (size_t k = 0; k < t.keys.size(); ++k) {
            bool eq = true;
            for (int c = 0; c < 3; ++c) eq = eq && fp_eq(batch[j][static_cast<size_t>(c)], t.keys[k][static_cast<size_t>(c)]);
            if (eq) hit = static_cast<int>(k);
        }
        for (int r = 0; r < 2; ++r) {
            Fp want = hit >= 0 ? t.vals[static_cast<size_t>(hit)][static_cast<size_t>(r)] : fp_zero(f);
            CHECK(fp_eq(out.at(r, static_cast<int>(j)), want));
        }
    }
}

TEST_CASE("ordering model realizes a swap-equivariant target") {
    auto f = make_format(2, 4);
    std::vector<Fp> alphabet = {parse_fp("1", f), parse_fp("1.25", f), parse_fp("2", f),
                                parse_fp("3", f)};
    int n = 3, d_out = 2;
    TargetFn target = make_swap_equiv_target(7, d_out, f);
    BuildResult res = assemble_ordering_model(alphabet, n, target, d_out, f);
    CHECK(res.gamma == 4);
    auto domain = distinct_token_sequences(alphabet, n, f);
    REQUIRE(domain.size() == 24);

    // bit-exact on the whole domain
    for (const FpMatrix& x : domain) CHECK(mat_eq(model_forward(res.model, x), target(x)));

    // outputs are swap-equivariant but not 3-cycle equivariant
    auto sw = Permutation::swap2(n, 0, 1);
    auto cyc = Permutation::cycle(n);
    bool cycle_violation = false;
    for (const FpMatrix& x : domain) {
        FpMatrix y = model_forward(res.model, x);
        CHECK(mat_eq(model_forward(res.model, permute_columns(x, sw, f)), permute_columns(y, sw, f)));
        if (!mat_eq(model_forward(res.model, permute_columns(x, cyc, f)), permute_columns(y, cyc, f)))
            cycle_violation = true;
    }
    CHECK(cycle_violation);

    // the order flags behind the memorizer: after the attention block, the
    // slot for (triple, trailing member) reads delta exactly when that member
    // comes last among the three
    int flag_count = 3 * res.gamma;
    auto cat = TripleCatalog::make(static_cast<int>(alphabet.size()));
    for (const FpMatrix& x : domain) {
        FpMatrix stream(res.t_d, n, f);
        for (int i = 0; i < n; ++i) stream.set(0, i, x.at(0, i));
        std::vector<Block> prefix(res.model.blocks.begin(),
                                  res.model.blocks.begin() + res.prefix_blocks);
        FpMatrix s = stack_forward(prefix, stream, f);
        for (size_t ti = 0; ti < cat.triples.size(); ++ti)
            for (int m = 0; m < 3; ++m) {
                // position of each triple member in x, if present
                int pos[3] = {-1, -1, -1};
                for (int c = 0; c < 3; ++c)
                    for (int i = 0; i < n; ++i)
                        if (fp_eq(x.at(0, i), alphabet[static_cast<size_t>(cat.triples[ti][static_cast<size_t>(c)])]))
                            pos[c] = i;
                bool all_there = pos[0] >= 0 && pos[1] >= 0 && pos[2] >= 0;
                bool trailing_last = all_there && pos[m] > pos[(m + 1) % 3] && pos[m] > pos[(m + 2) % 3];
                Fp flag = s.at(1 + flag_count + cat.slot(static_cast<int>(ti), m), 0);
                CHECK(fp_eq(flag, res.delta) == trailing_last);
            }
    }

    // n = 2 admits no complete triple; the model is exact on the pair domain
    {
        auto res2 = assemble_ordering_model(alphabet, 2, make_swap_equiv_target(3, d_out, f),
                                            d_out, f);
        for (const FpMatrix& x : distinct_token_sequences(alphabet, 2, f))
            CHECK(mat_eq(model_forward(res2.model, x), res2.target(x)));
    }
    CHECK_THROWS_AS(assemble_ordering_model(alphabet, 1, target, d_out, f), std::invalid_argument);
    // a non-equivariant target is rejected while factorizing
    TargetFn skew = [&](const FpMatrix& x) {
        FpMatrix y(d_out, x.cols(), f);
        for (int i = 0; i < x.cols(); ++i)
            for (int r = 0; r < d_out; ++r) y.set(r, i, i == 0 ? x.at(0, 0) : fp_zero(f));
        return y;
    };
    CHECK_THROWS_AS(assemble_ordering_model(alphabet, n, skew, d_out, f), std::logic_error);
}

TEST_CASE("counting model realizes a permutation-equivariant target") {
    auto f = make_format(2, 4);
    std::vector<Fp> alphabet;
    for (const char* s : {"1", "1.25", "1.5", "2", "3", "-4"}) alphabet.push_back(parse_fp(s, f));
    int n = 5, d_out = 2;
    TargetFn target = make_perm_equiv_target(19, d_out, alphabet, f);
    std::mt19937_64 rng(41);
    std::vector<FpMatrix> domain;
    for (int t = 0; t < 60; ++t) {
        FpMatrix x(1, n, f);
        for (int i = 0; i < n; ++i) x.set(0, i, alphabet[rng() % alphabet.size()]);
        domain.push_back(x);
    }
    for (const Fp& z : alphabet) {  // constant sequences
        FpMatrix x(1, n, f);
        for (int i = 0; i < n; ++i) x.set(0, i, z);
        domain.push_back(x);
    }
    BuildResult res = assemble_counting_model(alphabet, n, target, domain, d_out, f);
    CHECK(res.gamma == static_cast<int>(alphabet.size()));
    for (const FpMatrix& x : domain) {
        CHECK(mat_eq(model_forward(res.model, x), target(x)));
        // and on a random permutation of each input (same key set)
        std::vector<int> pm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) pm[static_cast<size_t>(i)] = i;
        std::shuffle(pm.begin(), pm.end(), rng);
        Permutation pi{pm};
        FpMatrix xp = permute_columns(x, pi, f);
        CHECK(mat_eq(model_forward(res.model, xp), target(xp)));
    }
    // flags after the attention block are the counter readings
    for (const FpMatrix& x : domain) {
        FpMatrix stream(res.t_d, n, f);
        for (int i = 0; i < n; ++i) stream.set(0, i, x.at(0, i));
        std::vector<Block> prefix(res.model.blocks.begin(),
                                  res.model.blocks.begin() + res.prefix_blocks);
        FpMatrix s = stack_forward(prefix, stream, f);
        auto counts = count_vector(x, alphabet);
        std::vector<Fp> flags;
        for (size_t j = 0; j < alphabet.size(); ++j)
            flags.push_back(s.at(1 + static_cast<int>(alphabet.size() + j), 0));
        CHECK(counts_from_flags(flags, n, f) == counts);
    }
    // sequence lengths with unrecoverable counts are rejected
    CHECK_THROWS_AS(assemble_counting_model(alphabet, 23, target, domain, d_out, f),
                    std::invalid_argument);
}
