#include "modrelu/serialize.hpp"

#include "json.hpp"

#include <cstdio>
#include <unordered_map>

namespace modrelu {

namespace {

using nlohmann::json;

struct Writer {
    std::string out;
    void raw(const char* s) { out += s; }
    void raw(char c) { out += c; }
    void num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
    }
    void integer(std::size_t v) { out += std::to_string(v); }
    void pair(cplx z) {
        raw('[');
        num(z.real());
        raw(',');
        num(z.imag());
        raw(']');
    }
};

void write_layer(Writer& w, const AffineLayer& l) {
    w.raw("{\"rows\":");
    w.integer(l.rows);
    w.raw(",\"cols\":");
    w.integer(l.cols);
    w.raw(",\"A\":[");
    for (std::size_t k = 0; k < l.A.size(); ++k) {
        if (k) w.raw(',');
        w.pair(l.A[k]);
    }
    w.raw("],\"b\":[");
    for (std::size_t k = 0; k < l.b.size(); ++k) {
        if (k) w.raw(',');
        w.pair(l.b[k]);
    }
    w.raw(']');
    if (!l.mask_A.empty()) {
        w.raw(",\"mask_A\":[");
        for (std::size_t k = 0; k < l.mask_A.size(); ++k) {
            if (k) w.raw(',');
            w.raw(l.mask_A[k] ? '1' : '0');
        }
        w.raw(']');
    }
    if (!l.mask_b.empty()) {
        w.raw(",\"mask_b\":[");
        for (std::size_t k = 0; k < l.mask_b.size(); ++k) {
            if (k) w.raw(',');
            w.raw(l.mask_b[k] ? '1' : '0');
        }
        w.raw(']');
    }
    w.raw('}');
}

void write_flat_body(Writer& w, const ModReLUNetwork& net) {
    w.raw("\"layers\":[");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (k) w.raw(',');
        write_layer(w, net.layers[k]);
    }
    w.raw(']');
}

void append_meta(Writer& w, const std::string& meta_json) {
    if (meta_json.empty()) return;
    json parsed = json::parse(meta_json);  // caller bug if not valid JSON
    if (!parsed.is_object()) throw ParamError("meta must be a JSON object");
    w.raw(",\"meta\":");
    w.out += meta_json;
}

const char* gadget_name(GadgetKind g) {
    switch (g) {
        case GadgetKind::ReExtract: return "re_extract";
        case GadgetKind::ImExtract: return "im_extract";
        default: return "";
    }
}

}  // namespace

std::string serialize(const ModReLUNetwork& net, const std::string& meta_json) {
    net.validate();
    Writer w;
    w.raw("{\"format\":\"modrelu-network\",");
    write_flat_body(w, net);
    append_meta(w, meta_json);
    w.raw("}\n");
    return std::move(w.out);
}

std::string serialize(const StructuredNet& net, const std::string& meta_json) {
    if (net.empty()) throw ParamError("empty structured net");
    Writer w;
    w.raw("{\"format\":\"modrelu-structured\",\"nodes\":[");

    std::unordered_map<const StructuredNode*, std::size_t> ids;
    bool first_node = true;
    // post-order: children before parents, shared nodes written once
    auto emit = [&](auto&& self, const StructuredNode* n) -> std::size_t {
        auto it = ids.find(n);
        if (it != ids.end()) return it->second;
        std::vector<std::size_t> child_ids;
        for (const NodePtr& c : n->children) child_ids.push_back(self(self, c.get()));
        if (!first_node) w.raw(',');
        first_node = false;
        switch (n->kind) {
            case StructuredNode::Kind::Leaf: {
                w.raw("{\"kind\":\"leaf\",");
                if (n->gadget != GadgetKind::None) {
                    w.raw("\"gadget\":\"");
                    w.raw(gadget_name(n->gadget));
                    w.raw("\",\"gadget_h\":");
                    w.num(n->gadget_h);
                    w.raw(',');
                }
                w.raw("\"net\":{");
                write_flat_body(w, n->net);
                w.raw("}}");
                break;
            }
            case StructuredNode::Kind::Serial:
            case StructuredNode::Kind::Parallel:
            case StructuredNode::Kind::WeightedSum: {
                if (n->kind == StructuredNode::Kind::Serial) w.raw("{\"kind\":\"serial\"");
                else if (n->kind == StructuredNode::Kind::Parallel) w.raw("{\"kind\":\"parallel\"");
                else w.raw("{\"kind\":\"weighted_sum\"");
                w.raw(",\"children\":[");
                for (std::size_t k = 0; k < child_ids.size(); ++k) {
                    if (k) w.raw(',');
                    w.integer(child_ids[k]);
                }
                w.raw(']');
                if (n->kind == StructuredNode::Kind::Parallel) {
                    w.raw(",\"shared_input\":");
                    w.raw(n->shared_input ? "true" : "false");
                }
                if (n->kind == StructuredNode::Kind::WeightedSum) {
                    w.raw(",\"coeffs\":[");
                    for (std::size_t k = 0; k < n->coeffs.size(); ++k) {
                        if (k) w.raw(',');
                        w.pair(n->coeffs[k]);
                    }
                    w.raw("],\"bias\":");
                    w.pair(n->bias);
                }
                w.raw('}');
                break;
            }
        }
        std::size_t id = ids.size();
        ids.emplace(n, id);
        return id;
    };
    std::size_t root_id = emit(emit, net.root().get());

    w.raw("],\"root\":");
    w.integer(root_id);
    append_meta(w, meta_json);
    w.raw("}\n");
    return std::move(w.out);
}

namespace {

cplx parse_pair(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ParseError(std::string(what) + " must be a [re, im] pair", 0);
    return cplx(j[0].get<double>(), j[1].get<double>());
}

AffineLayer parse_layer(const json& j) {
    if (!j.is_object()) throw ParseError("layer must be an object", 0);
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t cols = j.at("cols").get<std::size_t>();
    AffineLayer l(rows, cols);
    const json& a = j.at("A");
    const json& b = j.at("b");
    if (!a.is_array() || a.size() != rows * cols)
        throw ParseError("matrix entry count does not match rows*cols", 0);
    if (!b.is_array() || b.size() != rows)
        throw ParseError("bias entry count does not match rows", 0);
    for (std::size_t k = 0; k < a.size(); ++k) l.A[k] = parse_pair(a[k], "matrix entry");
    for (std::size_t k = 0; k < b.size(); ++k) l.b[k] = parse_pair(b[k], "bias entry");
    if (j.contains("mask_A")) {
        const json& m = j.at("mask_A");
        if (!m.is_array() || m.size() != rows * cols)
            throw ParseError("mask_A size does not match rows*cols", 0);
        l.mask_A.resize(rows * cols);
        for (std::size_t k = 0; k < m.size(); ++k)
            l.mask_A[k] = m[k].get<int>() != 0 ? 1 : 0;
    }
    if (j.contains("mask_b")) {
        const json& m = j.at("mask_b");
        if (!m.is_array() || m.size() != rows)
            throw ParseError("mask_b size does not match rows", 0);
        l.mask_b.resize(rows);
        for (std::size_t k = 0; k < m.size(); ++k)
            l.mask_b[k] = m[k].get<int>() != 0 ? 1 : 0;
    }
    return l;
}

ModReLUNetwork parse_flat(const json& j) {
    const json& layers = j.at("layers");
    if (!layers.is_array() || layers.empty())
        throw ParseError("network needs a non-empty layers array", 0);
    std::vector<AffineLayer> ls;
    ls.reserve(layers.size());
    for (const json& l : layers) ls.push_back(parse_layer(l));
    return ModReLUNetwork(std::move(ls));
}

StructuredNet parse_structured(const json& j) {
    const json& nodes = j.at("nodes");
    if (!nodes.is_array() || nodes.empty())
        throw ParseError("structured net needs a non-empty nodes array", 0);
    std::vector<StructuredNet> built;
    built.reserve(nodes.size());
    for (const json& nj : nodes) {
        const std::string kind = nj.at("kind").get<std::string>();
        if (kind == "leaf") {
            ModReLUNetwork net = parse_flat(nj.at("net"));
            if (nj.contains("gadget")) {
                const std::string g = nj.at("gadget").get<std::string>();
                GadgetKind gk = g == "re_extract" ? GadgetKind::ReExtract
                              : g == "im_extract" ? GadgetKind::ImExtract
                                                  : GadgetKind::None;
                if (gk == GadgetKind::None) throw ParseError("unknown gadget tag " + g, 0);
                built.push_back(StructuredNet::leaf_gadget(std::move(net), gk,
                                                           nj.at("gadget_h").get<double>()));
            } else {
                built.push_back(StructuredNet(std::move(net)));
            }
            continue;
        }
        std::vector<StructuredNet> children;
        for (const json& cid : nj.at("children")) {
            const std::size_t id = cid.get<std::size_t>();
            if (id >= built.size())
                throw ParseError("child id " + std::to_string(id) + " not yet defined", 0);
            children.push_back(built[id]);
        }
        if (kind == "serial") {
            built.push_back(StructuredNet::serial(std::move(children)));
        } else if (kind == "parallel") {
            built.push_back(StructuredNet::parallel_of(std::move(children),
                                                       nj.at("shared_input").get<bool>()));
        } else if (kind == "weighted_sum") {
            std::vector<cplx> coeffs;
            for (const json& c : nj.at("coeffs")) coeffs.push_back(parse_pair(c, "coefficient"));
            cplx bias = parse_pair(nj.at("bias"), "bias");
            built.push_back(StructuredNet::weighted(std::move(children), std::move(coeffs), bias));
        } else {
            throw ParseError("unknown node kind " + kind, 0);
        }
    }
    const std::size_t root = j.at("root").get<std::size_t>();
    if (root >= built.size()) throw ParseError("root id out of range", 0);
    return built[root];
}

json parse_top(std::string_view bytes) {
    try {
        return json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

std::string meta_text(const json& j) {
    if (!j.contains("meta")) return "";
    return j.at("meta").dump();
}

}  // namespace

ModReLUNetwork deserialize_network(std::string_view bytes) {
    json j = parse_top(bytes);
    try {
        if (j.value("format", "") != "modrelu-network")
            throw ParseError("expected a modrelu-network document", 0);
        return parse_flat(j);
    } catch (const json::exception& e) {
        throw ParseError(e.what(), 0);
    }
}

StructuredNet deserialize_structured(std::string_view bytes) {
    json j = parse_top(bytes);
    try {
        if (j.value("format", "") != "modrelu-structured")
            throw ParseError("expected a modrelu-structured document", 0);
        return parse_structured(j);
    } catch (const json::exception& e) {
        throw ParseError(e.what(), 0);
    }
}

Batch LoadedNet::evaluate_batch(const Batch& in) const {
    if (is_structured) return structured.evaluate_batch(in);
    Batch io = in;
    flat.evaluate_batch(io);
    return io;
}

LoadedNet load_network(std::string_view bytes) {
    json j = parse_top(bytes);
    LoadedNet out;
    try {
        const std::string fmt = j.value("format", "");
        if (fmt == "modrelu-network") {
            out.is_structured = false;
            out.flat = parse_flat(j);
        } else if (fmt == "modrelu-structured") {
            out.is_structured = true;
            out.structured = parse_structured(j);
        } else {
            throw ParseError("unknown or missing format tag", 0);
        }
        out.meta_json = meta_text(j);
    } catch (const json::exception& e) {
        throw ParseError(e.what(), 0);
    }
    return out;
}

}  // namespace modrelu
