#include <catch2/catch_amalgamated.hpp>

#include "fpt/json_io.hpp"
#include "fpt/verify.hpp"

using namespace fpt;

namespace {

VerifyConfig small_cfg() {
    VerifyConfig cfg;
    cfg.seed = 42;
    cfg.thm45_models = 5;
    cfg.thm45_inputs = 3;
    cfg.thm2_models = 2;
    cfg.thm2_pairs = 2;
    cfg.thm2_shadow_tries = 10;
    cfg.thm3_random = 25;
    return cfg;
}

void check_invariants(const SuiteReport& r) {
    CHECK(r.passed + r.failed + r.skipped == r.total);
    CHECK(r.failures.empty() == (r.failed == 0));
    CHECK(static_cast<long>(r.failures.size()) <= r.failed);
    CHECK(r.total > 0);
}

}  // namespace

TEST_CASE("all suites pass at p=2 q=4") {
    FpFormat f = make_format(2, 4);
    VerifyConfig cfg = small_cfg();
    for (const std::string& name : suite_names()) {
        INFO("suite " << name);
        SuiteReport r = run_suite(name, f, cfg);
        check_invariants(r);
        for (const auto& fl : r.failures)
            UNSCOPED_INFO(fl.input << " expected " << fl.expected << " got " << fl.actual);
        CHECK(r.failed == 0);
        if (name == "lemma-oneppp")
            CHECK(r.skipped == r.total);  // stated for p >= 3
        else
            CHECK(r.skipped == 0);
        CHECK(r.p == 2);
        CHECK(r.q == 4);
        CHECK(r.seed == cfg.seed);
    }
}

TEST_CASE("all suites pass or skip at p=3 q=4") {
    FpFormat f = make_format(3, 4);
    VerifyConfig cfg = small_cfg();
    for (const std::string& name : suite_names()) {
        INFO("suite " << name);
        SuiteReport r = run_suite(name, f, cfg);
        check_invariants(r);
        for (const auto& fl : r.failures)
            UNSCOPED_INFO(fl.input << " expected " << fl.expected << " got " << fl.actual);
        CHECK(r.failed == 0);
        if (name == "lemma-onep2" || name == "thm2-similarity" || name == "thm3-micro") {
            CHECK(r.skipped == r.total);
            CHECK_FALSE(r.notes.empty());
        } else {
            CHECK(r.skipped == 0);
        }
    }
}

TEST_CASE("lemma-oneppp is skipped at p=2") {
    SuiteReport r = run_suite("lemma-oneppp", make_format(2, 5), small_cfg());
    CHECK(r.skipped == r.total);
}

TEST_CASE("unknown suite and narrow formats are rejected") {
    FpFormat ok = make_format(2, 4);
    CHECK_THROWS_AS(run_suite("no-such-suite", ok, small_cfg()), std::invalid_argument);
    // p=2, q=3 has too narrow an exponent range for the theorem suites
    FpFormat narrow = make_format(2, 3);
    CHECK_THROWS_AS(run_suite("thm4-thm5", narrow, small_cfg()), std::invalid_argument);
    CHECK_THROWS_AS(run_suite("thm1-micro", narrow, small_cfg()), std::invalid_argument);
    // non-theorem suites still run there
    SuiteReport r = run_suite("saturation", narrow, small_cfg());
    CHECK(r.failed == 0);
}

TEST_CASE("suites are deterministic given format and seed") {
    FpFormat f = make_format(2, 4);
    VerifyConfig cfg = small_cfg();
    for (const std::string& name : {std::string("thm4-thm5"), std::string("thm2-similarity")}) {
        SuiteReport a = run_suite(name, f, cfg);
        SuiteReport b = run_suite(name, f, cfg);
        nlohmann::json ja = report_to_json(a), jb = report_to_json(b);
        ja.erase("wall_seconds");
        jb.erase("wall_seconds");
        CHECK(ja == jb);
    }
}

TEST_CASE("report json shape") {
    FpFormat f = make_format(2, 4);
    SuiteReport r = run_suite("lemma-onep2", f, small_cfg());
    nlohmann::json j = report_to_json(r);
    CHECK(j["suite"] == "lemma-onep2");
    CHECK(j["format"]["p"] == 2);
    CHECK(j["format"]["q"] == 4);
    CHECK(j["total"].get<long>() == r.total);
    CHECK(j["failures"].is_array());
    CHECK(j["wall_seconds"].is_number());
}

TEST_CASE("model sampler is reproducible and respects ranges") {
    FpFormat f = make_format(2, 4);
    ModelSamplerConfig mc;
    mc.seed = 7;
    TransformerModel a = sample_model(mc, f);
    TransformerModel b = sample_model(mc, f);
    CHECK(mat_eq(a.w_in, b.w_in));
    CHECK(a.blocks.size() == b.blocks.size());
    REQUIRE_FALSE(a.blocks.empty());
    CHECK(mat_eq(a.blocks[0].ff.w1, b.blocks[0].ff.w1));
    CHECK(a.w_in.rows() >= mc.d.lo);
    CHECK(a.w_in.rows() <= mc.d.hi);
    CHECK(a.w_in.cols() >= mc.d_in.lo);
    CHECK(a.w_in.cols() <= mc.d_in.hi);
    // every sampled weight is finite and within [-2,2] or an extreme
    Fp two = fp_from_int(2, f);
    for (int i = 0; i < a.w_in.rows(); ++i)
        for (int j = 0; j < a.w_in.cols(); ++j) {
            Fp v = a.w_in.at(i, j);
            REQUIRE(fp_is_finite(v));
            bool in_range = fp_cmp(v, fp_neg(two)) >= 0 && fp_cmp(v, two) <= 0;
            bool extreme = fp_eq(v, fp_max(f)) || fp_eq(v, fp_neg(fp_max(f))) ||
                           fp_eq(v, fp_omega(f)) || fp_eq(v, fp_neg(fp_omega(f)));
            CHECK((in_range || extreme));
        }
}

TEST_CASE("division contract violations stay at zero across suites") {
    long before = static_cast<long>(div_violation_counter().load());
    FpFormat f = make_format(2, 4);
    run_suite("saturation", f, small_cfg());
    run_suite("thm4-thm5", f, small_cfg());
    CHECK(static_cast<long>(div_violation_counter().load()) == before);
}

TEST_CASE("model and matrix json round-trip bit-exactly") {
    FpFormat f = make_format(2, 4);
    ModelSamplerConfig mc;
    mc.seed = 99;
    TransformerModel m = sample_model(mc, f);
    nlohmann::json jm = model_to_json(m);
    TransformerModel m2 = model_from_json(jm);
    CHECK(model_to_json(m2) == jm);
    CHECK(mat_eq(m.w_in, m2.w_in));
    CHECK(mat_eq(m.w_out, m2.w_out));
    REQUIRE(m.blocks.size() == m2.blocks.size());
    for (size_t b = 0; b < m.blocks.size(); ++b) {
        CHECK(mat_eq(m.blocks[b].ff.w1, m2.blocks[b].ff.w1));
        REQUIRE(m.blocks[b].attn.heads.size() == m2.blocks[b].attn.heads.size());
        for (size_t h = 0; h < m.blocks[b].attn.heads.size(); ++h)
            CHECK(mat_eq(m.blocks[b].attn.heads[h].wv, m2.blocks[b].attn.heads[h].wv));
    }
    // a matrix with every value of the format, specials included
    auto all = enumerate_all(f);
    FpMatrix x(1, static_cast<int>(all.size()), f);
    for (size_t j = 0; j < all.size(); ++j) x.set(0, static_cast<int>(j), all[j]);
    nlohmann::json jx = matrix_to_json(x, f);
    CHECK(matrix_to_json(matrix_from_json(jx, f), f) == jx);
}
