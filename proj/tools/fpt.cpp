// Command-line entry point: run verification suites, build and evaluate
// constructed models, print non-associativity traces, and enumerate formats.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpt/json_io.hpp"
#include "fpt/verify.hpp"

namespace {

using namespace fpt;

struct FormatOpts {
    int p = 0, q = 0;
    std::string preset;
};

void add_format_opts(CLI::App* cmd, FormatOpts& fo) {
    cmd->add_option("--p", fo.p, "significand bits after the leading 1");
    cmd->add_option("--q", fo.q, "exponent bits");
    cmd->add_option("--preset", fo.preset, "named format: e5m2 (p=2,q=5) or e4m3 (p=3,q=4)");
}

FpFormat resolve_format(const FormatOpts& fo) {
    if (!fo.preset.empty()) {
        if (fo.p != 0 || fo.q != 0)
            throw CLI::ValidationError("--preset conflicts with --p/--q");
        if (fo.preset == "e5m2") return make_format(2, 5);
        if (fo.preset == "e4m3") return make_format(3, 4);
        throw CLI::ValidationError("unknown preset '" + fo.preset + "'");
    }
    if (fo.p == 0 || fo.q == 0)
        throw CLI::ValidationError("format required: --p and --q, or --preset");
    return make_format(fo.p, fo.q);
}

// Alphabet tokens: exact dyadic decimal strings or 0x-prefixed bit patterns.
// Non-representable literals are rejected, never rounded.
std::vector<Fp> parse_alphabet(const std::string& spec, const FpFormat& f) {
    std::vector<Fp> out;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        if (tok.rfind("0x", 0) == 0 || tok.rfind("0X", 0) == 0)
            out.push_back(decode_bits(std::stoull(tok.substr(2), nullptr, 16), f));
        else
            out.push_back(parse_fp(tok, f));
    }
    if (out.empty()) throw CLI::ValidationError("--alphabet: no tokens parsed");
    return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return nlohmann::json::parse(is);
}

int run_verify(const FpFormat& f, std::vector<std::string> suites, uint64_t seed, int samples,
               const std::string& report_path) {
    if (suites.empty() || (suites.size() == 1 && suites[0] == "all")) suites = suite_names();
    VerifyConfig cfg;
    cfg.seed = seed;
    if (samples > 0) {
        cfg.thm45_models = samples;
        cfg.thm2_models = std::max(1, samples / 8);
        cfg.thm3_random = samples * 5;
    }
    nlohmann::json out = nlohmann::json::array();
    bool any_failed = false;
    for (const std::string& name : suites) {
        SuiteReport rep = run_suite(name, f, cfg);
        any_failed = any_failed || rep.failed > 0;
        std::cout << rep.suite << ": " << rep.passed << "/" << rep.total << " passed";
        if (rep.skipped) std::cout << ", " << rep.skipped << " skipped";
        if (rep.failed) std::cout << ", " << rep.failed << " FAILED";
        std::cout << " (" << rep.wall_seconds << " s)\n";
        for (const auto& note : rep.notes) std::cout << "  note: " << note << "\n";
        for (const auto& fl : rep.failures)
            std::cout << "  FAIL " << fl.input << ": expected " << fl.expected << ", got "
                      << fl.actual << "\n";
        out.push_back(report_to_json(rep));
    }
    if (!report_path.empty()) write_json(report_path, out);
    return any_failed ? 1 : 0;
}

nlohmann::json manifest_for(const BuildResult& res, const FpFormat& f,
                            const std::vector<FpMatrix>& domain, bool ordering) {
    nlohmann::json m;
    m["format"] = format_to_json(f);
    nlohmann::json alpha_j = nlohmann::json::array();
    for (const Fp& t : res.alphabet)
        alpha_j.push_back({{"decimal", to_decimal(t, f)}, {"bits", to_hex(t, f)}});
    m["alphabet"] = alpha_j;
    m["gamma"] = res.gamma;
    m["n"] = res.n;
    m["alpha"] = to_decimal(res.alpha, f);
    m["beta"] = to_decimal(res.beta, f);
    if (ordering) {
        m["beta_prime"] = to_decimal(res.beta_prime, f);
        m["delta"] = to_decimal(res.delta, f);
    }
    m["dims"] = {{"t_d", res.t_d}, {"t_m", res.t_m}, {"t_r", res.t_r}};
    nlohmann::json table = nlohmann::json::array();
    for (const FpMatrix& x : domain)
        table.push_back({{"input", matrix_to_json(x, f)},
                         {"output", matrix_to_json(res.target(x), f)}});
    m["target_table"] = table;
    return m;
}

int run_build(const std::string& kind, const FpFormat& f, const std::string& alphabet_spec,
              int n, uint64_t seed, int d_out, const std::string& output) {
    std::vector<Fp> alphabet = parse_alphabet(alphabet_spec, f);
    BuildResult res;
    std::vector<FpMatrix> domain;
    if (kind == "thm1") {
        domain = distinct_token_sequences(alphabet, n, f);
        res = assemble_ordering_model(alphabet, n, make_swap_equiv_target(seed, d_out, f), d_out,
                                      f);
    } else if (kind == "thm3") {
        // checked domain: all constant sequences plus a seeded random sample
        std::mt19937_64 rng(seed ^ 0x77ULL);
        for (const Fp& t : alphabet) {
            FpMatrix x(1, n, f);
            for (int j = 0; j < n; ++j) x.set(0, j, t);
            domain.push_back(std::move(x));
        }
        for (int i = 0; i < 100; ++i) {
            FpMatrix x(1, n, f);
            for (int j = 0; j < n; ++j) x.set(0, j, alphabet[rng() % alphabet.size()]);
            domain.push_back(std::move(x));
        }
        res = assemble_counting_model(alphabet, n,
                                      make_perm_equiv_target(seed, d_out, alphabet, f), domain,
                                      d_out, f);
    } else {
        throw CLI::ValidationError("build kind must be thm1 or thm3");
    }
    write_json(output, model_to_json(res.model));
    std::string manifest_path = output + ".manifest.json";
    write_json(manifest_path, manifest_for(res, f, domain, kind == "thm1"));
    std::cout << "model written to " << output << "\nmanifest written to " << manifest_path
              << "\n";
    return 0;
}

int run_eval(const std::string& model_path, const std::string& input_path,
             const std::string& output_path) {
    TransformerModel model = model_from_json(read_json(model_path));
    const FpFormat& f = model.fmt;
    FpMatrix x = matrix_from_json(read_json(input_path), f);
    FpMatrix y = model_forward(model, x);
    nlohmann::json jy = matrix_to_json(y, f);
    if (output_path.empty())
        std::cout << jy.dump(2) << "\n";
    else
        write_json(output_path, jy);
    for (int i = 0; i < y.rows(); ++i) {
        for (int j = 0; j < y.cols(); ++j) std::cout << to_decimal(y.at(i, j), f) << " ";
        std::cout << "\n";
    }
    return 0;
}

int run_trace(const std::string& what, const FpFormat& f) {
    if (what != "nonassoc") throw CLI::ValidationError("trace supports: nonassoc");
    auto show = [&](const Fp& a, const Fp& b, const Fp& c) {
        Fp ab = fp_add(a, b, f), bc = fp_add(b, c, f);
        Fp l = fp_add(ab, c, f), r = fp_add(a, bc, f);
        std::cout << "a = " << to_decimal(a, f) << ", b = " << to_decimal(b, f)
                  << ", c = " << to_decimal(c, f) << "\n"
                  << "(a + b) + c: a + b = " << to_decimal(ab, f) << ", then + c = "
                  << to_decimal(l, f) << "\n"
                  << "a + (b + c): b + c = " << to_decimal(bc, f) << ", then a + = "
                  << to_decimal(r, f) << "\n"
                  << "results " << (fp_eq(l, r) ? "agree" : "differ") << "\n";
        return !fp_eq(l, r);
    };
    if (f.p >= 3) {
        Fp op = fp_succ(fp_one(f), f), opp = fp_succ(op, f);
        if (show(op, opp, opp)) return 0;
    }
    // fall back to a search for the first non-associative positive triple
    for (const Fp& a : enumerate_finite(f))
        for (const Fp& b : enumerate_finite(f))
            for (const Fp& c : enumerate_finite(f)) {
                if (fp_cmp(a, fp_zero(f)) <= 0 || fp_cmp(b, fp_zero(f)) <= 0 ||
                    fp_cmp(c, fp_zero(f)) <= 0)
                    continue;
                Fp l = fp_add(fp_add(a, b, f), c, f), r = fp_add(a, fp_add(b, c, f), f);
                if (!fp_eq(l, r)) {
                    show(a, b, c);
                    return 0;
                }
            }
    std::cout << "no non-associative triple found\n";
    return 1;
}

int run_enumerate(const FpFormat& f) {
    for (const Fp& x : enumerate_all(f))
        std::cout << to_hex(x, f) << "  " << to_decimal(x, f) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parametric minifloat arithmetic and transformer construction toolkit"};
    app.require_subcommand(1);

    FormatOpts vf, bf, tf, ef;
    std::vector<std::string> suites;
    uint64_t vseed = 42;
    int vsamples = 0;
    std::string report_path;
    auto* verify = app.add_subcommand("verify", "run verification suites");
    add_format_opts(verify, vf);
    verify->add_option("--suite", suites, "suite names, or 'all'")->delimiter(',');
    verify->add_option("--seed", vseed, "suite seed");
    verify->add_option("--samples", vsamples, "sampled-model count override");
    verify->add_option("--report", report_path, "write a JSON report here");

    std::string bkind, alphabet_spec, boutput = "model.json";
    int bn = 3, bd_out = 1;
    uint64_t bseed = 7;
    auto* build = app.add_subcommand("build", "assemble a constructed model");
    build->add_option("kind", bkind, "thm1 (ordering) or thm3 (counting)")->required();
    add_format_opts(build, bf);
    build->add_option("--alphabet", alphabet_spec, "comma-separated tokens (decimal or 0x bits)")
        ->required();
    build->add_option("--n", bn, "sequence length");
    build->add_option("--seed", bseed, "target seed");
    build->add_option("--d-out", bd_out, "output rows");
    build->add_option("--output", boutput, "model JSON path");

    std::string emodel, einput, eoutput;
    auto* eval = app.add_subcommand("eval", "run a model on an input matrix");
    eval->add_option("--model", emodel, "model JSON")->required();
    eval->add_option("--input", einput, "input matrix JSON")->required();
    eval->add_option("--output", eoutput, "output matrix JSON path");

    std::string twhat = "nonassoc";
    auto* trace = app.add_subcommand("trace", "print arithmetic traces");
    trace->add_option("what", twhat, "nonassoc");
    add_format_opts(trace, tf);

    auto* enumerate = app.add_subcommand("enumerate", "list every value of a format");
    add_format_opts(enumerate, ef);

    try {
        app.parse(argc, argv);
        if (verify->parsed())
            return run_verify(resolve_format(vf), suites, vseed, vsamples, report_path);
        if (build->parsed())
            return run_build(bkind, resolve_format(bf), alphabet_spec, bn, bseed, bd_out, boutput);
        if (eval->parsed()) return run_eval(emodel, einput, eoutput);
        if (trace->parsed()) return run_trace(twhat, resolve_format(tf));
        if (enumerate->parsed()) return run_enumerate(resolve_format(ef));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
