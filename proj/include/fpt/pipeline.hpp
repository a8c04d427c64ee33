#pragma once

// Staged ReLU pipelines and their embedding into feed-forward blocks.
//
// A Pipeline is a sequence of ReLU stages followed by one affine output map.
// Each stage row is relu(sum_k w_k * src_k + bias) where sources are pipeline
// inputs (stage -1) or rows of earlier stages; the output rows read the last
// stage only.  embed_pipeline turns the pipeline into one feed-forward block
// per stage that operates on designated coordinates of a residual stream:
// intermediate values live in scratch coordinates above scratch_base, are
// erased (subtracted back out) by the block after their last consumer, and the
// output map is folded into the last block's second matrix, so the last
// stage's rows never touch the stream.  Freed scratch coordinates are reused
// by later stages.
//
// The embedding changes the order in which a row's terms are folded (stream
// coordinates are consumed in ascending order).  Every builder in this
// library only emits rows whose folds are order independent, and the tests
// check the embedded blocks against the gadgets' semantic contracts.
//
// Preconditions on the evaluated stream: scratch coordinates start at zero,
// every intermediate value is finite, and stage outputs are nonnegative by
// construction (ReLU), so a single negated read erases them exactly.  Input
// coordinates may hold values of either sign; when erase_inputs is set they
// are removed with a relu(x) / relu(-x) pair.

#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fpt/arith.hpp"
#include "fpt/matrix.hpp"
#include "fpt/transformer.hpp"

namespace fpt {

struct PRef {
    int stage = -1;  // -1 = pipeline input, otherwise an earlier stage index
    int idx = 0;
};

struct PTerm {
    PRef src;
    Fp w;
};

struct PRow {
    std::vector<PTerm> terms;
    Fp bias;
};

struct PStage {
    std::vector<PRow> rows;
};

// Output row: affine in the last stage's rows, no ReLU.
struct PLinRow {
    std::vector<std::pair<int, Fp>> terms;  // (last-stage row index, weight)
    Fp bias;
};

struct Pipeline {
    int d_in = 0;
    std::vector<PStage> stages;
    std::vector<PLinRow> outputs;
};

// One feed-forward block in sparse form.  Hidden row folds follow ascending
// stream coordinate; second-matrix folds follow ascending hidden index.
struct SparseFf {
    struct HRow {
        std::vector<std::pair<int, Fp>> terms;  // (stream coordinate, weight)
        Fp bias;
    };
    struct W2Entry {
        int coord;
        int hidden;
        Fp w;
    };
    std::vector<HRow> rows;
    std::vector<W2Entry> w2;
    std::vector<std::pair<int, Fp>> b2;
};

struct EmbedLayout {
    std::vector<int> input_coords;   // where the pipeline inputs live
    std::vector<int> output_coords;  // where the outputs land
    int scratch_base = 0;            // first coordinate available as scratch
    bool erase_inputs = false;       // erase input coords once no stage reads them
};

struct EmbeddedPipeline {
    std::vector<SparseFf> ffs;  // one per stage, in order
    int width = 0;              // minimum stream width used
    int max_hidden = 0;         // largest hidden dimension across the blocks
};

inline FfParams materialize_ff(const SparseFf& ff, int r, int d, const FpFormat& f) {
    int nrows = static_cast<int>(ff.rows.size());
    if (r < nrows) throw std::invalid_argument("materialize_ff: r too small");
    FfParams p{FpMatrix(r, d, f), FpMatrix(r, 1, f), FpMatrix(d, r, f), FpMatrix(d, 1, f)};
    for (int k = 0; k < nrows; ++k) {
        for (auto& [c, w] : ff.rows[k].terms) {
            if (c < 0 || c >= d) throw std::invalid_argument("materialize_ff: d too small");
            p.w1.set(k, c, w);
        }
        p.b1.set(k, 0, ff.rows[k].bias);
    }
    for (auto& e : ff.w2) {
        if (e.coord < 0 || e.coord >= d || e.hidden < 0 || e.hidden >= nrows)
            throw std::invalid_argument("materialize_ff: bad w2 entry");
        p.w2.set(e.coord, e.hidden, e.w);
    }
    for (auto& [c, v] : ff.b2) p.b2.set(c, 0, v);
    return p;
}

inline EmbeddedPipeline embed_pipeline(const Pipeline& pipe, const EmbedLayout& lay,
                                       const FpFormat& f) {
    int t_count = static_cast<int>(pipe.stages.size());
    if (t_count == 0) throw std::invalid_argument("embed_pipeline: pipeline has no stages");
    if (static_cast<int>(lay.input_coords.size()) != pipe.d_in)
        throw std::invalid_argument("embed_pipeline: input_coords size mismatch");
    if (lay.output_coords.size() != pipe.outputs.size())
        throw std::invalid_argument("embed_pipeline: output_coords size mismatch");
    for (int c : lay.input_coords)
        if (c < 0 || c >= lay.scratch_base)
            throw std::invalid_argument("embed_pipeline: input coord not below scratch_base");
    for (int c : lay.output_coords)
        if (c < 0 || c >= lay.scratch_base)
            throw std::invalid_argument("embed_pipeline: output coord not below scratch_base");

    int last = t_count - 1;
    // Last stage a value is read by.  Inputs default to stage 0 so unused
    // inputs are erased immediately; stage values below the last stage that
    // nothing reads are erased one block after they are written.
    std::map<std::pair<int, int>, int> last_use;
    for (int i = 0; i < pipe.d_in; ++i) last_use[{-1, i}] = 0;
    for (int s = 0; s + 1 < t_count; ++s)
        for (int i = 0; i < static_cast<int>(pipe.stages[s].rows.size()); ++i)
            last_use[{s, i}] = s + 1;
    for (int t = 0; t < t_count; ++t) {
        for (auto& row : pipe.stages[t].rows) {
            for (auto& term : row.terms) {
                if (term.src.stage >= t)
                    throw std::invalid_argument("embed_pipeline: row reads a later stage");
                int rows_avail = term.src.stage < 0
                                     ? pipe.d_in
                                     : static_cast<int>(pipe.stages[term.src.stage].rows.size());
                if (term.src.idx < 0 || term.src.idx >= rows_avail)
                    throw std::invalid_argument("embed_pipeline: bad term reference");
                auto key = std::make_pair(term.src.stage, term.src.idx);
                if (last_use[key] < t) last_use[key] = t;
            }
        }
    }
    for (auto& out : pipe.outputs)
        for (auto& [idx, w] : out.terms) {
            (void)w;
            if (idx < 0 || idx >= static_cast<int>(pipe.stages[last].rows.size()))
                throw std::invalid_argument("embed_pipeline: output reads outside last stage");
        }

    std::set<int> free_slots;
    int next_fresh = lay.scratch_base;
    auto alloc = [&]() {
        if (!free_slots.empty()) {
            int c = *free_slots.begin();
            free_slots.erase(free_slots.begin());
            return c;
        }
        return next_fresh++;
    };

    std::map<std::pair<int, int>, int> slot;  // (stage, idx) -> stream coordinate
    Fp one = fp_one(f), minus_one = fp_neg(fp_one(f)), zero = fp_zero(f);

    EmbeddedPipeline out;
    out.ffs.resize(t_count);
    for (int t = 0; t < t_count; ++t) {
        SparseFf& ff = out.ffs[t];
        // Stage rows become hidden rows; term sources map to stream coords.
        for (auto& row : pipe.stages[t].rows) {
            SparseFf::HRow h;
            std::set<int> seen;
            for (auto& term : row.terms) {
                int c = term.src.stage < 0 ? lay.input_coords[term.src.idx]
                                           : slot.at({term.src.stage, term.src.idx});
                if (!seen.insert(c).second)
                    throw std::invalid_argument("embed_pipeline: duplicate coordinate in row");
                h.terms.emplace_back(c, term.w);
            }
            h.bias = row.bias;
            ff.rows.push_back(std::move(h));
        }
        // Results of stages below the last go to scratch; the last stage feeds
        // the output map directly.
        if (t < last) {
            for (int i = 0; i < static_cast<int>(pipe.stages[t].rows.size()); ++i) {
                int c = alloc();
                slot[{t, i}] = c;
                ff.w2.push_back({c, i, one});
            }
        } else {
            // Output coordinates must hold zero by now; anything still alive
            // there would be silently added into the result.
            std::set<int> outs(lay.output_coords.begin(), lay.output_coords.end());
            for (auto& [key, lu] : last_use) {
                bool alive = key.first < 0 ? (lay.erase_inputs ? lu >= last : true)
                                           : (key.first < last && lu >= last);
                if (!alive) continue;
                int c = key.first < 0 ? lay.input_coords[key.second] : slot.at(key);
                if (outs.count(c))
                    throw std::invalid_argument(
                        "embed_pipeline: output coordinate still occupied at the last block");
            }
            for (size_t r = 0; r < pipe.outputs.size(); ++r) {
                for (auto& [idx, w] : pipe.outputs[r].terms)
                    ff.w2.push_back({lay.output_coords[r], idx, w});
                if (!fp_is_zero(pipe.outputs[r].bias))
                    ff.b2.emplace_back(lay.output_coords[r], pipe.outputs[r].bias);
            }
        }
        // Erase values whose last consumer is this stage.
        for (auto& [key, lu] : last_use) {
            if (lu != t) continue;
            if (key.first >= 0) {
                int c = slot.at(key);
                int k = static_cast<int>(ff.rows.size());
                ff.rows.push_back({{{c, one}}, zero});  // stage outputs are nonnegative
                ff.w2.push_back({c, k, minus_one});
                free_slots.insert(c);
                slot.erase(key);
            } else if (lay.erase_inputs) {
                int c = lay.input_coords[key.second];
                int k = static_cast<int>(ff.rows.size());
                ff.rows.push_back({{{c, one}}, zero});
                ff.rows.push_back({{{c, minus_one}}, zero});
                ff.w2.push_back({c, k, minus_one});
                ff.w2.push_back({c, k + 1, one});
            }
        }
        out.max_hidden = std::max(out.max_hidden, static_cast<int>(ff.rows.size()));
    }

    out.width = next_fresh;
    for (int c : lay.input_coords) out.width = std::max(out.width, c + 1);
    for (int c : lay.output_coords) out.width = std::max(out.width, c + 1);
    out.width = std::max(out.width, lay.scratch_base);
    return out;
}

// All-zero single-head attention: softmax of a zero score matrix mixes
// columns, but WO is zero so the residual passes through unchanged.
inline AttnParams identity_attention(int m, int d, const FpFormat& f) {
    AttnHead h{FpMatrix(m, d, f), FpMatrix(m, d, f), FpMatrix(m, d, f), FpMatrix(d, m, f)};
    return AttnParams{{h}};
}

}  // namespace fpt
