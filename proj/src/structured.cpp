#include "modrelu/structured.hpp"

#include "modrelu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>
#include <utility>

namespace modrelu {

namespace {

NodePtr require_root(const NodePtr& p) {
    if (!p) throw ParamError("empty structured net");
    return p;
}

std::shared_ptr<StructuredNode> make_node(StructuredNode::Kind k) {
    auto n = std::make_shared<StructuredNode>();
    n->kind = k;
    return n;
}

}  // namespace

StructuredNet::StructuredNet(ModReLUNetwork net) {
    auto n = make_node(StructuredNode::Kind::Leaf);
    net.validate();
    n->depth_cache = net.depth();
    n->din_cache = net.input_dim();
    n->dout_cache = net.output_dim();
    n->net = std::move(net);
    root_ = std::move(n);
}

StructuredNet::StructuredNet(NodePtr root) : root_(require_root(root)) {}

StructuredNet StructuredNet::leaf_gadget(ModReLUNetwork net, GadgetKind g, double h) {
    if (g == GadgetKind::None) throw ParamError("gadget leaf needs a gadget kind");
    if (!(h > 0.0) || !std::isfinite(h)) throw ParamError("gadget scale must be positive");
    if (net.input_dim() != 1 || net.output_dim() != 1)
        throw DimensionError("extractor gadgets are scalar to scalar");
    StructuredNet s(std::move(net));
    auto n = std::const_pointer_cast<StructuredNode>(s.root_);
    n->gadget = g;
    n->gadget_h = h;
    return s;
}

StructuredNet StructuredNet::serial(std::vector<StructuredNet> stages) {
    if (stages.empty()) throw ParamError("serial needs at least one stage");
    if (stages.size() == 1) return std::move(stages.front());
    auto n = make_node(StructuredNode::Kind::Serial);
    n->depth_cache = 1;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const StructuredNet& s = stages[k];
        if (s.empty()) throw ParamError("serial stage is empty");
        if (k > 0 && s.input_dim() != stages[k - 1].output_dim())
            throw DimensionError("serial stages do not conform");
        n->depth_cache += s.depth() - 1;
        n->children.push_back(s.root());
    }
    n->din_cache = stages.front().input_dim();
    n->dout_cache = stages.back().output_dim();
    return StructuredNet(NodePtr(std::move(n)));
}

StructuredNet StructuredNet::parallel_of(std::vector<StructuredNet> branches, bool shared_input) {
    if (branches.empty()) throw ParamError("parallel needs at least one branch");
    auto n = make_node(StructuredNode::Kind::Parallel);
    n->shared_input = shared_input;
    n->depth_cache = branches.front().depth();
    for (const StructuredNet& b : branches) {
        if (b.empty()) throw ParamError("parallel branch is empty");
        if (b.depth() != n->depth_cache) throw DimensionError("parallel requires equal depths");
        if (shared_input && b.input_dim() != branches.front().input_dim())
            throw DimensionError("shared parallel requires one common input dim");
        n->din_cache += b.input_dim();
        n->dout_cache += b.output_dim();
        n->children.push_back(b.root());
    }
    if (shared_input) n->din_cache = branches.front().input_dim();
    return StructuredNet(NodePtr(std::move(n)));
}

StructuredNet StructuredNet::weighted(std::vector<StructuredNet> terms, std::vector<cplx> coeffs,
                                      cplx bias) {
    if (terms.empty()) throw ParamError("weighted sum needs at least one term");
    if (terms.size() != coeffs.size()) throw DimensionError("one coefficient per term required");
    for (const cplx& c : coeffs) require_finite(c, "weighted sum coefficient");
    require_finite(bias, "weighted sum bias");
    auto n = make_node(StructuredNode::Kind::WeightedSum);
    n->depth_cache = terms.front().depth();
    n->din_cache = terms.front().input_dim();
    n->dout_cache = 1;
    for (const StructuredNet& t : terms) {
        if (t.empty()) throw ParamError("weighted sum term is empty");
        if (t.depth() != n->depth_cache) throw DimensionError("weighted sum requires equal depths");
        if (t.input_dim() != n->din_cache)
            throw DimensionError("weighted sum requires one common input dim");
        if (t.output_dim() != 1) throw DimensionError("weighted sum requires scalar terms");
        n->children.push_back(t.root());
    }
    n->coeffs = std::move(coeffs);
    n->bias = bias;
    return StructuredNet(NodePtr(std::move(n)));
}

std::size_t StructuredNet::depth() const { return require_root(root_)->depth_cache; }
std::size_t StructuredNet::input_dim() const { return require_root(root_)->din_cache; }
std::size_t StructuredNet::output_dim() const { return require_root(root_)->dout_cache; }

// ---------------------------------------------------------------------------
// evaluation

namespace {

struct PlanEntry {
    std::uint32_t out_stream = 0;
    std::uint32_t uses = 0;
};

// First pass over the DAG: assign each distinct (node, input stream) pair a
// deterministic output stream id and count how often it is requested. The
// second pass caches exactly the pairs requested more than once, dropping
// each cached value at its last use. Iterate chains built from one shared
// stage node telescope through this map: an s-fold and an (s+1)-fold branch
// differ by one stage evaluation, not by a re-run of the whole prefix.
//
// A compiled approximant evaluates far more (node, stream) pairs inside its
// product subnetworks than it can ever share; past `cap` pairs the plan is
// abandoned and evaluation recomputes every occurrence instead of keeping a
// map that would dwarf the values it indexes.
struct EvalPlan {
    std::unordered_map<const StructuredNode*, std::uint32_t> node_ids;
    std::unordered_map<std::uint64_t, PlanEntry> entries;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> slice_streams;
    std::uint32_t next_stream = 1;
    std::size_t cap = 6000000;
    bool overflow = false;

    std::uint32_t id_of(const StructuredNode* n) {
        auto it = node_ids.find(n);
        if (it != node_ids.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(node_ids.size());
        node_ids.emplace(n, id);
        return id;
    }
    static std::uint64_t key(std::uint32_t node_id, std::uint32_t stream) {
        return (std::uint64_t(node_id) << 32) | stream;
    }

    std::uint32_t walk(const StructuredNode* n, std::uint32_t in_stream) {
        if (overflow) return 0;
        const std::uint64_t k = key(id_of(n), in_stream);
        if (auto it = entries.find(k); it != entries.end()) {
            ++it->second.uses;
            return it->second.out_stream;
        }
        if (entries.size() >= cap) {
            overflow = true;
            return 0;
        }
        std::uint32_t out = 0;
        switch (n->kind) {
            case StructuredNode::Kind::Leaf:
                out = next_stream++;
                break;
            case StructuredNode::Kind::Serial: {
                std::uint32_t cur = in_stream;
                for (const NodePtr& c : n->children) cur = walk(c.get(), cur);
                out = cur;
                break;
            }
            case StructuredNode::Kind::Parallel: {
                if (n->shared_input) {
                    for (const NodePtr& c : n->children) walk(c.get(), in_stream);
                } else {
                    std::vector<std::uint32_t> slices;
                    slices.reserve(n->children.size());
                    for (const NodePtr& c : n->children) {
                        const std::uint32_t sub = next_stream++;
                        slices.push_back(sub);
                        walk(c.get(), sub);
                    }
                    slice_streams[k] = std::move(slices);
                }
                out = next_stream++;
                break;
            }
            case StructuredNode::Kind::WeightedSum: {
                for (const NodePtr& c : n->children) walk(c.get(), in_stream);
                out = next_stream++;
                break;
            }
        }
        if (overflow) return 0;
        entries.emplace(k, PlanEntry{out, 1});
        return out;
    }
};

struct EvalCtx {
    EvalPlan plan;
    bool planned = false;
    std::unordered_map<std::uint64_t, std::pair<Batch, std::uint32_t>> cache;
    BatchPool pool;
    const kernels::KernelTable* tab = nullptr;

    Batch clone(const Batch& b) {
        Batch c = pool.acquire(b.width, b.count);
        std::copy(b.re.begin(), b.re.end(), c.re.begin());
        std::copy(b.im.begin(), b.im.end(), c.im.begin());
        return c;
    }

    // Every batch handed back by eval() is owned by the caller; temporaries
    // go back to the pool at their last use.
    Batch eval(const StructuredNode* n, const Batch& in, std::uint32_t in_stream) {
        if (!planned) return compute(n, in, 0);
        const std::uint64_t k = EvalPlan::key(plan.id_of(n), in_stream);
        if (auto hit = cache.find(k); hit != cache.end()) {
            if (--hit->second.second == 0) {
                Batch out = std::move(hit->second.first);
                cache.erase(hit);
                return out;
            }
            return clone(hit->second.first);
        }
        Batch out = compute(n, in, in_stream);
        const std::uint32_t uses = plan.entries.at(k).uses;
        if (uses > 1) cache.emplace(k, std::make_pair(clone(out), uses - 1));
        return out;
    }

    std::uint32_t stream_after(const StructuredNode* n, std::uint32_t in_stream) {
        return plan.entries.at(EvalPlan::key(plan.id_of(n), in_stream)).out_stream;
    }

    Batch compute(const StructuredNode* n, const Batch& in, std::uint32_t in_stream) {
        switch (n->kind) {
            case StructuredNode::Kind::Leaf: {
                if (n->gadget != GadgetKind::None) {
                    Batch out = pool.acquire(1, in.count);
                    if (n->gadget == GadgetKind::ReExtract)
                        tab->re_extract(out.re.data(), out.im.data(), in.re.data(), in.im.data(),
                                        n->gadget_h, in.count);
                    else
                        tab->im_extract(out.re.data(), out.im.data(), in.re.data(), in.im.data(),
                                        n->gadget_h, in.count);
                    return out;
                }
                Batch io = clone(in);
                n->net.evaluate_batch(io, &pool);
                return io;
            }
            case StructuredNode::Kind::Serial: {
                Batch cur = eval(n->children.front().get(), in, in_stream);
                std::uint32_t cur_stream =
                    planned ? stream_after(n->children.front().get(), in_stream) : 0;
                for (std::size_t i = 1; i < n->children.size(); ++i) {
                    Batch next = eval(n->children[i].get(), cur, cur_stream);
                    if (planned) cur_stream = stream_after(n->children[i].get(), cur_stream);
                    pool.release(std::move(cur));
                    cur = std::move(next);
                }
                return cur;
            }
            case StructuredNode::Kind::Parallel: {
                Batch out = pool.acquire(n->dout_cache, in.count);
                const std::vector<std::uint32_t>* slices = nullptr;
                if (planned && !n->shared_input)
                    slices = &plan.slice_streams.at(EvalPlan::key(plan.id_of(n), in_stream));
                std::size_t ro = 0, co = 0;
                for (std::size_t i = 0; i < n->children.size(); ++i) {
                    const StructuredNode* c = n->children[i].get();
                    Batch r;
                    if (n->shared_input) {
                        r = eval(c, in, in_stream);
                    } else {
                        Batch sub = pool.acquire(c->din_cache, in.count);
                        for (std::size_t j = 0; j < c->din_cache; ++j) {
                            std::copy_n(in.row_re(co + j), in.count, sub.row_re(j));
                            std::copy_n(in.row_im(co + j), in.count, sub.row_im(j));
                        }
                        co += c->din_cache;
                        r = eval(c, sub, slices ? (*slices)[i] : 0);
                        pool.release(std::move(sub));
                    }
                    for (std::size_t j = 0; j < c->dout_cache; ++j) {
                        std::copy_n(r.row_re(j), in.count, out.row_re(ro + j));
                        std::copy_n(r.row_im(j), in.count, out.row_im(ro + j));
                    }
                    ro += c->dout_cache;
                    pool.release(std::move(r));
                }
                return out;
            }
            case StructuredNode::Kind::WeightedSum: {
                Batch out = pool.acquire(1, in.count);
                std::fill(out.re.begin(), out.re.end(), n->bias.real());
                std::fill(out.im.begin(), out.im.end(), n->bias.imag());
                for (std::size_t i = 0; i < n->children.size(); ++i) {
                    Batch r = eval(n->children[i].get(), in, in_stream);
                    tab->caxpy(out.re.data(), out.im.data(), n->coeffs[i].real(),
                               n->coeffs[i].imag(), r.re.data(), r.im.data(), in.count);
                    pool.release(std::move(r));
                }
                return out;
            }
        }
        throw Error("unreachable node kind");
    }
};

}  // namespace

Batch StructuredNet::evaluate_batch(const Batch& in) const {
    const StructuredNode* r = require_root(root_).get();
    if (in.width != r->din_cache) throw DimensionError("batch width does not match network");
    EvalCtx ctx;
    ctx.tab = &kernels::active();
    ctx.plan.walk(r, 0);
    ctx.planned = !ctx.plan.overflow;
    if (!ctx.planned) {
        ctx.plan.entries.clear();
        ctx.plan.slice_streams.clear();
        ctx.plan.node_ids.clear();
    }
    return ctx.eval(r, in, 0);
}

std::vector<cplx> StructuredNet::evaluate(const std::vector<cplx>& x) const {
    if (x.size() != input_dim()) throw DimensionError("input size does not match network");
    Batch in(x.size(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) in.set(i, 0, x[i]);
    Batch out = evaluate_batch(in);
    std::vector<cplx> y(out.width);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = out.at(i, 0);
    return y;
}

// ---------------------------------------------------------------------------
// structural statistics
//
// Slot counts are computed per occurrence: a subnet referenced twice in the
// DAG contributes twice, matching what flattening would produce. Boundary
// mask patterns ride along so serial fusion can form the boolean product.

namespace {

struct MaskMat {
    std::size_t rows = 0, cols = 0;
    std::vector<std::uint8_t> a;  // rows*cols allowed bits
    std::vector<std::uint8_t> b;  // rows allowed bits
};

MaskMat mask_of(const AffineLayer& l) {
    MaskMat m;
    m.rows = l.rows;
    m.cols = l.cols;
    m.a.resize(l.rows * l.cols);
    m.b.resize(l.rows);
    for (std::size_t i = 0; i < l.rows; ++i) {
        for (std::size_t j = 0; j < l.cols; ++j) m.a[i * l.cols + j] = l.allowed_A(i, j) ? 1 : 0;
        m.b[i] = l.allowed_b(i) ? 1 : 0;
    }
    return m;
}

std::size_t slot_count(const MaskMat& m) {
    std::size_t s = 0;
    for (std::uint8_t v : m.a) s += v;
    for (std::uint8_t v : m.b) s += v;
    return s;
}

MaskMat fuse_mask(const MaskMat& outer_first, const MaskMat& inner_last) {
    if (outer_first.cols != inner_last.rows)
        throw DimensionError("mask fusion dims do not conform");
    MaskMat f;
    f.rows = outer_first.rows;
    f.cols = inner_last.cols;
    f.a.assign(f.rows * f.cols, 0);
    f.b.assign(f.rows, 0);
    for (std::size_t i = 0; i < f.rows; ++i) {
        std::uint8_t bias = outer_first.b[i];
        for (std::size_t k = 0; k < outer_first.cols; ++k) {
            if (!outer_first.a[i * outer_first.cols + k]) continue;
            bias = bias || inner_last.b[k];
            for (std::size_t j = 0; j < f.cols; ++j)
                if (inner_last.a[k * f.cols + j]) f.a[i * f.cols + j] = 1;
        }
        f.b[i] = bias;
    }
    return f;
}

MaskMat stack_masks(const std::vector<const MaskMat*>& ms, bool vertical) {
    MaskMat out;
    for (const MaskMat* m : ms) {
        out.rows += m->rows;
        out.cols = vertical ? m->cols : out.cols + m->cols;
    }
    out.a.assign(out.rows * out.cols, 0);
    out.b.assign(out.rows, 0);
    std::size_t ro = 0, co = 0;
    for (const MaskMat* m : ms) {
        for (std::size_t i = 0; i < m->rows; ++i) {
            for (std::size_t j = 0; j < m->cols; ++j)
                out.a[(ro + i) * out.cols + co + j] = m->a[i * m->cols + j];
            out.b[ro + i] = m->b[i];
        }
        ro += m->rows;
        if (!vertical) co += m->cols;
    }
    return out;
}

struct SStats {
    std::size_t depth = 0;
    std::vector<std::size_t> ncounts;
    std::size_t total = 0;
    double maxw = 0.0;
    MaskMat first, last;
};

SStats leaf_sstats(const ModReLUNetwork& net) {
    SStats s;
    ArchitectureStats a = net.stats();
    s.depth = a.depth;
    s.ncounts = a.neuron_counts;
    s.total = a.weight_count;
    s.maxw = a.max_weight_magnitude;
    s.first = mask_of(net.layers.front());
    s.last = mask_of(net.layers.back());
    return s;
}

SStats serial_combine(const SStats& inner, const SStats& outer) {
    MaskMat fused = fuse_mask(outer.first, inner.last);
    SStats r;
    r.depth = inner.depth + outer.depth - 1;
    r.ncounts.assign(inner.ncounts.begin(), inner.ncounts.end() - 1);
    r.ncounts.insert(r.ncounts.end(), outer.ncounts.begin() + 1, outer.ncounts.end());
    r.total = inner.total - slot_count(inner.last) + outer.total - slot_count(outer.first) +
              slot_count(fused);
    r.maxw = std::max(inner.maxw, outer.maxw);
    r.first = inner.depth == 1 ? fused : inner.first;
    r.last = outer.depth == 1 ? std::move(fused) : outer.last;
    return r;
}

SStats parallel_combine(const std::vector<const SStats*>& cs, bool shared) {
    SStats r;
    r.depth = cs.front()->depth;
    r.ncounts.assign(r.depth + 1, 0);
    for (const SStats* c : cs) {
        for (std::size_t l = 0; l <= r.depth; ++l) r.ncounts[l] += c->ncounts[l];
        r.total += c->total;
        r.maxw = std::max(r.maxw, c->maxw);
    }
    if (shared) r.ncounts[0] = cs.front()->ncounts[0];
    std::vector<const MaskMat*> firsts, lasts;
    for (const SStats* c : cs) {
        firsts.push_back(&c->first);
        lasts.push_back(&c->last);
    }
    if (r.depth == 1) {
        r.first = stack_masks(firsts, shared);
        r.last = r.first;
    } else {
        r.first = stack_masks(firsts, shared);
        r.last = stack_masks(lasts, false);
    }
    return r;
}

SStats ws_combine(const std::vector<const SStats*>& cs, cplx bias, const std::vector<cplx>& coeffs) {
    const std::size_t depth = cs.front()->depth;
    SStats r;
    r.depth = depth;
    for (const SStats* c : cs) r.maxw = std::max(r.maxw, c->maxw);
    for (const cplx& c : coeffs) r.maxw = std::max(r.maxw, std::abs(c));
    r.maxw = std::max(r.maxw, std::abs(bias));
    const bool bias_slot = bias != cplx(0.0, 0.0);

    MaskMat top;
    top.rows = 1;
    top.b.assign(1, bias_slot ? 1 : 0);
    for (const SStats* c : cs) {
        top.cols += c->last.cols;
        if (c->last.b[0]) top.b[0] = 1;
    }
    top.a.reserve(top.cols);
    for (const SStats* c : cs)
        top.a.insert(top.a.end(), c->last.a.begin(), c->last.a.end());

    if (depth == 1) {
        // single fused affine row over the common input
        top.cols = cs.front()->last.cols;
        top.a.assign(top.cols, 0);
        for (const SStats* c : cs)
            for (std::size_t j = 0; j < top.cols; ++j)
                if (c->last.a[j]) top.a[j] = 1;
        r.ncounts = {cs.front()->ncounts[0], 1};
        r.total = slot_count(top);
        r.first = top;
        r.last = std::move(top);
        return r;
    }

    r.ncounts.assign(depth + 1, 0);
    r.ncounts[0] = cs.front()->ncounts[0];
    r.ncounts[depth] = 1;
    for (const SStats* c : cs)
        for (std::size_t l = 1; l < depth; ++l) r.ncounts[l] += c->ncounts[l];
    r.total = slot_count(top);
    for (const SStats* c : cs) r.total += c->total - slot_count(c->last);
    std::vector<const MaskMat*> firsts;
    for (const SStats* c : cs) firsts.push_back(&c->first);
    r.first = stack_masks(firsts, true);
    r.last = std::move(top);
    return r;
}

const SStats& sstats_of(const StructuredNode* n,
                        std::unordered_map<const StructuredNode*, SStats>& memo) {
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    SStats s;
    switch (n->kind) {
        case StructuredNode::Kind::Leaf:
            s = leaf_sstats(n->net);
            break;
        case StructuredNode::Kind::Serial: {
            s = sstats_of(n->children.front().get(), memo);
            for (std::size_t k = 1; k < n->children.size(); ++k)
                s = serial_combine(s, sstats_of(n->children[k].get(), memo));
            break;
        }
        case StructuredNode::Kind::Parallel: {
            std::vector<const SStats*> cs;
            for (const NodePtr& c : n->children) cs.push_back(&sstats_of(c.get(), memo));
            s = parallel_combine(cs, n->shared_input);
            break;
        }
        case StructuredNode::Kind::WeightedSum: {
            std::vector<const SStats*> cs;
            for (const NodePtr& c : n->children) cs.push_back(&sstats_of(c.get(), memo));
            s = ws_combine(cs, n->bias, n->coeffs);
            break;
        }
    }
    return memo.emplace(n, std::move(s)).first->second;
}

}  // namespace

ArchitectureStats StructuredNet::stats() const {
    std::unordered_map<const StructuredNode*, SStats> memo;
    const SStats& s = sstats_of(require_root(root_).get(), memo);
    ArchitectureStats a;
    a.depth = s.depth;
    a.neuron_counts = s.ncounts;
    for (std::size_t c : a.neuron_counts) a.total_neurons += c;
    a.weight_count = s.total;
    a.max_weight_magnitude = s.maxw;
    return a;
}

// ---------------------------------------------------------------------------
// flattening

namespace {

std::size_t element_count(const ModReLUNetwork& n) {
    std::size_t c = 0;
    for (const AffineLayer& l : n.layers) c += l.rows * l.cols + l.rows;
    return c;
}

std::size_t layer_elems(const AffineLayer& l) { return l.rows * l.cols + l.rows; }

void check_budget(std::size_t est, std::size_t budget) {
    if (est > budget)
        throw Error("flatten would materialize " + std::to_string(est) +
                    " dense elements, budget is " + std::to_string(budget));
}

ModReLUNetwork flatten_node(const StructuredNode* n, std::size_t budget) {
    switch (n->kind) {
        case StructuredNode::Kind::Leaf:
            check_budget(element_count(n->net), budget);
            return n->net;
        case StructuredNode::Kind::Serial: {
            ModReLUNetwork acc = flatten_node(n->children.front().get(), budget);
            for (std::size_t k = 1; k < n->children.size(); ++k) {
                ModReLUNetwork o = flatten_node(n->children[k].get(), budget);
                const AffineLayer& of = o.layers.front();
                const std::size_t est = element_count(acc) - layer_elems(acc.layers.back()) +
                                        of.rows * acc.layers.back().cols + of.rows +
                                        element_count(o) - layer_elems(of);
                check_budget(est, budget);
                acc = compose(o, acc);
            }
            return acc;
        }
        case StructuredNode::Kind::Parallel: {
            std::vector<ModReLUNetwork> flats;
            flats.reserve(n->children.size());
            for (const NodePtr& c : n->children) flats.push_back(flatten_node(c.get(), budget));
            std::size_t est = 0;
            for (std::size_t li = 0; li < n->depth_cache; ++li) {
                std::size_t rows = 0, cols = 0;
                for (const ModReLUNetwork& f : flats) {
                    rows += f.layers[li].rows;
                    cols += f.layers[li].cols;
                }
                if (n->shared_input && li == 0) cols = flats.front().layers[0].cols;
                est += rows * cols + rows;
            }
            check_budget(est, budget);
            return n->shared_input ? parallel_shared(flats) : parallel(flats);
        }
        case StructuredNode::Kind::WeightedSum: {
            std::vector<ModReLUNetwork> flats;
            flats.reserve(n->children.size());
            for (const NodePtr& c : n->children) flats.push_back(flatten_node(c.get(), budget));
            std::size_t est = 0;
            for (std::size_t li = 0; li + 1 < n->depth_cache; ++li) {
                std::size_t rows = 0, cols = 0;
                for (const ModReLUNetwork& f : flats) {
                    rows += f.layers[li].rows;
                    cols += f.layers[li].cols;
                }
                if (li == 0) cols = flats.front().layers[0].cols;
                est += rows * cols + rows;
            }
            std::size_t top_cols = 0;
            for (const ModReLUNetwork& f : flats) top_cols += f.layers.back().cols;
            est += top_cols + 1;
            check_budget(est, budget);
            return weighted_sum_flat(flats, n->coeffs, n->bias);
        }
    }
    throw Error("unreachable node kind");
}

}  // namespace

ModReLUNetwork StructuredNet::flatten(std::size_t max_elements) const {
    return flatten_node(require_root(root_).get(), max_elements);
}

// ---------------------------------------------------------------------------
// fingerprint

namespace {

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;
    void byte(std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ull;
    }
    void word(std::uint64_t w) {
        for (int k = 0; k < 8; ++k) byte(static_cast<std::uint8_t>(w >> (8 * k)));
    }
};

std::uint64_t fp_of(const StructuredNode* n,
                    std::unordered_map<const StructuredNode*, std::uint64_t>& memo) {
    auto it = memo.find(n);
    if (it != memo.end()) return it->second;
    Fnv f;
    f.byte(static_cast<std::uint8_t>(n->kind));
    switch (n->kind) {
        case StructuredNode::Kind::Leaf: {
            f.byte(static_cast<std::uint8_t>(n->gadget));
            for (const AffineLayer& l : n->net.layers) {
                f.word(l.rows);
                f.word(l.cols);
                for (std::size_t i = 0; i < l.rows; ++i) {
                    for (std::size_t j = 0; j < l.cols; ++j) f.byte(l.allowed_A(i, j) ? 1 : 0);
                    f.byte(l.allowed_b(i) ? 1 : 0);
                }
            }
            break;
        }
        case StructuredNode::Kind::Serial:
            for (const NodePtr& c : n->children) f.word(fp_of(c.get(), memo));
            break;
        case StructuredNode::Kind::Parallel:
            f.byte(n->shared_input ? 1 : 0);
            for (const NodePtr& c : n->children) f.word(fp_of(c.get(), memo));
            break;
        case StructuredNode::Kind::WeightedSum:
            f.word(n->children.size());
            f.byte(n->bias != cplx(0.0, 0.0) ? 1 : 0);
            for (const NodePtr& c : n->children) f.word(fp_of(c.get(), memo));
            break;
    }
    memo.emplace(n, f.h);
    return f.h;
}

}  // namespace

std::string StructuredNet::fingerprint() const {
    std::unordered_map<const StructuredNode*, std::uint64_t> memo;
    std::uint64_t h = fp_of(require_root(root_).get(), memo);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// spec-level combinators

StructuredNet weighted_sum(const std::vector<StructuredNet>& nets,
                           const std::vector<cplx>& coeffs, cplx bias) {
    return StructuredNet::weighted(nets, coeffs, bias);
}

StructuredNet pad_depth(const StructuredNet& net, std::size_t target_depth, double radius) {
    if (net.empty()) throw ParamError("empty structured net");
    if (target_depth < net.depth()) throw ParamError("pad_depth cannot shrink a network");
    if (target_depth == net.depth()) return net;
    const std::size_t chain_depth = target_depth - net.depth() + 1;
    ModReLUNetwork chain = identity_net(net.output_dim(), radius);
    while (chain.depth() < chain_depth)
        chain = compose(identity_net(net.output_dim(), radius), chain);
    return StructuredNet::serial({net, StructuredNet(std::move(chain))});
}

}  // namespace modrelu

