#pragma once

// JSON (de)serialization for matrices and models.  Entries are written as the
// lowercase hex bit patterns of the format, so round trips are byte-exact.

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpt/fp.hpp"
#include "fpt/format.hpp"
#include "fpt/matrix.hpp"
#include "fpt/transformer.hpp"

namespace fpt {

using json = nlohmann::json;

inline json format_to_json(const FpFormat& f) { return json{{"p", f.p}, {"q", f.q}}; }

inline FpFormat format_from_json(const json& j) {
    return make_format(j.at("p").get<int>(), j.at("q").get<int>());
}

inline json matrix_to_json(const FpMatrix& m, const FpFormat& f) {
    json entries = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) entries.push_back(to_hex(m.at(i, j), f));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

inline FpMatrix matrix_from_json(const json& j, const FpFormat& f) {
    int rows = j.at("rows").get<int>(), cols = j.at("cols").get<int>();
    const json& entries = j.at("entries");
    if (static_cast<int>(entries.size()) != rows * cols)
        throw std::invalid_argument("matrix_from_json: entry count mismatch");
    FpMatrix m(rows, cols, f);
    size_t k = 0;
    for (int i = 0; i < rows; ++i)
        for (int c = 0; c < cols; ++c) m.set(i, c, from_hex(entries[k++].get<std::string>(), f));
    return m;
}

inline json model_to_json(const TransformerModel& m) {
    const FpFormat& f = m.fmt;
    int h = m.blocks.empty() ? 0 : static_cast<int>(m.blocks[0].attn.heads.size());
    int mm = h > 0 ? m.blocks[0].attn.heads[0].wq.rows() : 0;
    int r = m.blocks.empty() ? 0 : m.blocks[0].ff.w1.rows();
    json blocks = json::array();
    for (const Block& b : m.blocks) {
        json heads = json::array();
        for (const AttnHead& hd : b.attn.heads)
            heads.push_back(json{{"wq", matrix_to_json(hd.wq, f)},
                                 {"wk", matrix_to_json(hd.wk, f)},
                                 {"wv", matrix_to_json(hd.wv, f)},
                                 {"wo", matrix_to_json(hd.wo, f)}});
        blocks.push_back(json{{"heads", heads},
                              {"ff", json{{"w1", matrix_to_json(b.ff.w1, f)},
                                          {"b1", matrix_to_json(b.ff.b1, f)},
                                          {"w2", matrix_to_json(b.ff.w2, f)},
                                          {"b2", matrix_to_json(b.ff.b2, f)}}}});
    }
    return json{{"format", format_to_json(f)},
                {"dims",
                 json{{"d", m.w_in.rows()},
                      {"d_in", m.w_in.cols()},
                      {"d_out", m.w_out.rows()},
                      {"blocks", m.blocks.size()},
                      {"heads", h},
                      {"m", mm},
                      {"r", r}}},
                {"w_in", matrix_to_json(m.w_in, f)},
                {"b_in", matrix_to_json(m.b_in, f)},
                {"blocks", blocks},
                {"w_out", matrix_to_json(m.w_out, f)},
                {"b_out", matrix_to_json(m.b_out, f)}};
}

inline TransformerModel model_from_json(const json& j) {
    TransformerModel m;
    m.fmt = format_from_json(j.at("format"));
    const FpFormat& f = m.fmt;
    m.w_in = matrix_from_json(j.at("w_in"), f);
    m.b_in = matrix_from_json(j.at("b_in"), f);
    for (const json& bj : j.at("blocks")) {
        Block b;
        for (const json& hj : bj.at("heads"))
            b.attn.heads.push_back(AttnHead{matrix_from_json(hj.at("wq"), f),
                                            matrix_from_json(hj.at("wk"), f),
                                            matrix_from_json(hj.at("wv"), f),
                                            matrix_from_json(hj.at("wo"), f)});
        const json& ff = bj.at("ff");
        b.ff = FfParams{matrix_from_json(ff.at("w1"), f), matrix_from_json(ff.at("b1"), f),
                        matrix_from_json(ff.at("w2"), f), matrix_from_json(ff.at("b2"), f)};
        m.blocks.push_back(std::move(b));
    }
    m.w_out = matrix_from_json(j.at("w_out"), f);
    m.b_out = matrix_from_json(j.at("b_out"), f);
    return m;
}

}  // namespace fpt
