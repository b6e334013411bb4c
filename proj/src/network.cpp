#include "modrelu/network.hpp"

#include "modrelu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace modrelu {

void AffineLayer::mask_from_values() {
    mask_A.assign(rows * cols, 0);
    mask_b.assign(rows, 0);
    for (std::size_t k = 0; k < A.size(); ++k) mask_A[k] = A[k] != cplx(0.0, 0.0) ? 1 : 0;
    for (std::size_t k = 0; k < b.size(); ++k) mask_b[k] = b[k] != cplx(0.0, 0.0) ? 1 : 0;
}

void AffineLayer::validate() const {
    if (rows == 0 || cols == 0) throw DimensionError("affine layer with zero extent");
    if (A.size() != rows * cols || b.size() != rows)
        throw DimensionError("affine layer storage does not match its extents");
    if (!mask_A.empty() && mask_A.size() != rows * cols)
        throw DimensionError("matrix mask size mismatch");
    if (!mask_b.empty() && mask_b.size() != rows)
        throw DimensionError("bias mask size mismatch");
    for (const cplx& v : A) require_finite(v, "affine matrix entry");
    for (const cplx& v : b) require_finite(v, "affine bias entry");
    if (!mask_A.empty())
        for (std::size_t k = 0; k < A.size(); ++k)
            if (mask_A[k] == 0 && A[k] != cplx(0.0, 0.0))
                throw ParamError("masked-out matrix slot holds a nonzero value");
    if (!mask_b.empty())
        for (std::size_t k = 0; k < b.size(); ++k)
            if (mask_b[k] == 0 && b[k] != cplx(0.0, 0.0))
                throw ParamError("masked-out bias slot holds a nonzero value");
}

ModReLUNetwork::ModReLUNetwork(std::vector<AffineLayer> ls) : layers(std::move(ls)) {
    validate();
}

void ModReLUNetwork::validate() const {
    if (layers.empty()) throw DimensionError("network needs at least one layer");
    for (const AffineLayer& l : layers) l.validate();
    for (std::size_t k = 1; k < layers.size(); ++k)
        if (layers[k].cols != layers[k - 1].rows)
            throw DimensionError("layer " + std::to_string(k) + " does not conform to layer " +
                                 std::to_string(k - 1));
}

std::vector<cplx> ModReLUNetwork::evaluate(const std::vector<cplx>& x) const {
    if (x.size() != input_dim()) throw DimensionError("input size does not match network");
    Batch batch(input_dim(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) batch.set(i, 0, x[i]);
    evaluate_batch(batch);
    std::vector<cplx> out(output_dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = batch.at(i, 0);
    return out;
}

Batch BatchPool::acquire(std::size_t width, std::size_t count) {
    auto it = buckets.find((std::uint64_t(width) << 32) | std::uint64_t(count));
    if (it != buckets.end() && !it->second.empty()) {
        Batch b = std::move(it->second.back());
        it->second.pop_back();
        return b;
    }
    return Batch(width, count);
}

void BatchPool::release(Batch&& b) {
    if (b.width == 0 || b.re.size() != b.width * b.count || b.im.size() != b.width * b.count)
        return;  // moved-from husk
    buckets[(std::uint64_t(b.width) << 32) | std::uint64_t(b.count)].push_back(std::move(b));
}

void ModReLUNetwork::evaluate_batch(Batch& io, BatchPool* pool) const {
    if (io.width != input_dim()) throw DimensionError("batch width does not match network");
    const kernels::KernelTable& tab = kernels::active();
    const std::size_t n = io.count;
    BatchPool local;
    if (!pool) pool = &local;

    std::vector<std::pair<std::size_t, cplx>> nz;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const AffineLayer& l = layers[li];
        Batch out = pool->acquire(l.rows, n);
        for (std::size_t i = 0; i < l.rows; ++i) {
            std::fill_n(out.row_re(i), n, l.b[i].real());
            std::fill_n(out.row_im(i), n, l.b[i].imag());
            nz.clear();
            for (std::size_t j = 0; j < l.cols; ++j) {
                cplx a = l.at(i, j);
                if (a != cplx(0.0, 0.0)) nz.emplace_back(j, a);
            }
            for (const auto& [j, a] : nz)
                tab.caxpy(out.row_re(i), out.row_im(i), a.real(), a.imag(),
                          io.row_re(j), io.row_im(j), n);
        }
        if (li + 1 < layers.size())
            tab.modrelu(out.re.data(), out.im.data(), l.rows * n);
        pool->release(std::move(io));
        io = std::move(out);
    }
}

ArchitectureStats ModReLUNetwork::stats() const {
    ArchitectureStats s;
    s.depth = layers.size();
    s.neuron_counts.reserve(layers.size() + 1);
    s.neuron_counts.push_back(input_dim());
    for (const AffineLayer& l : layers) s.neuron_counts.push_back(l.rows);
    for (std::size_t c : s.neuron_counts) s.total_neurons += c;
    for (const AffineLayer& l : layers) {
        for (std::size_t i = 0; i < l.rows; ++i) {
            for (std::size_t j = 0; j < l.cols; ++j)
                if (l.allowed_A(i, j)) {
                    ++s.weight_count;
                    s.max_weight_magnitude = std::max(s.max_weight_magnitude, std::abs(l.at(i, j)));
                }
            if (l.allowed_b(i)) {
                ++s.weight_count;
                s.max_weight_magnitude = std::max(s.max_weight_magnitude, std::abs(l.b[i]));
            }
        }
    }
    return s;
}

std::size_t ModReLUNetwork::nonzero_weight_count() const {
    std::size_t w = 0;
    for (const AffineLayer& l : layers) {
        for (const cplx& v : l.A) w += v != cplx(0.0, 0.0) ? 1 : 0;
        for (const cplx& v : l.b) w += v != cplx(0.0, 0.0) ? 1 : 0;
    }
    return w;
}

ModReLUNetwork identity_net(std::size_t dim, double radius) {
    if (dim == 0) throw ParamError("identity needs at least one coordinate");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ParamError("identity radius must be positive");
    const double r1 = radius + 1.0;
    AffineLayer l1(2 * dim, dim), l2(dim, 2 * dim);
    for (std::size_t k = 0; k < dim; ++k) {
        l1.at(2 * k, k) = 2.0;
        l1.at(2 * k + 1, k) = 1.0;
        l1.b[2 * k] = 2.0 * r1;
        l1.b[2 * k + 1] = r1;
        l2.at(k, 2 * k) = 1.0;
        l2.at(k, 2 * k + 1) = -1.0;
        l2.b[k] = -r1;
    }
    if (dim > 1) {
        l1.mask_from_values();
        l2.mask_from_values();
    }
    return ModReLUNetwork({std::move(l1), std::move(l2)});
}

ModReLUNetwork affine_net(AffineLayer layer) {
    return ModReLUNetwork({std::move(layer)});
}

namespace {

// outer_first(A1, b1) applied to inner_last(A2, b2): A1*A2 x + A1*b2 + b1.
AffineLayer fuse_boundary(const AffineLayer& outer_first, const AffineLayer& inner_last) {
    if (outer_first.cols != inner_last.rows)
        throw DimensionError("outer input does not match inner output");
    const std::size_t p = outer_first.rows, q = outer_first.cols, r = inner_last.cols;
    AffineLayer f(p, r);
    for (std::size_t i = 0; i < p; ++i) {
        cplx acc = outer_first.b[i];
        for (std::size_t k = 0; k < q; ++k) {
            cplx a = outer_first.at(i, k);
            if (a == cplx(0.0, 0.0)) continue;
            acc += a * inner_last.b[k];
            for (std::size_t j = 0; j < r; ++j) f.at(i, j) += a * inner_last.at(k, j);
        }
        f.b[i] = acc;
    }
    if (outer_first.has_masks() || inner_last.has_masks()) {
        f.mask_A.assign(p * r, 0);
        f.mask_b.assign(p, 0);
        for (std::size_t i = 0; i < p; ++i) {
            bool bias = outer_first.allowed_b(i);
            for (std::size_t k = 0; k < q; ++k) {
                if (!outer_first.allowed_A(i, k)) continue;
                bias = bias || inner_last.allowed_b(k);
                for (std::size_t j = 0; j < r; ++j)
                    if (inner_last.allowed_A(k, j)) f.mask_A[i * r + j] = 1;
            }
            f.mask_b[i] = bias ? 1 : 0;
            // fp products of masked zeros can leave a signed zero behind
            for (std::size_t j = 0; j < r; ++j)
                if (!f.mask_A[i * r + j]) f.at(i, j) = cplx(0.0, 0.0);
            if (!f.mask_b[i]) f.b[i] = cplx(0.0, 0.0);
        }
    }
    return f;
}

}  // namespace

ModReLUNetwork compose(const ModReLUNetwork& outer, const ModReLUNetwork& inner) {
    if (outer.input_dim() != inner.output_dim())
        throw DimensionError("compose: outer input dim != inner output dim");
    std::vector<AffineLayer> ls;
    ls.reserve(outer.depth() + inner.depth() - 1);
    for (std::size_t k = 0; k + 1 < inner.depth(); ++k) ls.push_back(inner.layers[k]);
    ls.push_back(fuse_boundary(outer.layers.front(), inner.layers.back()));
    for (std::size_t k = 1; k < outer.depth(); ++k) ls.push_back(outer.layers[k]);
    return ModReLUNetwork(std::move(ls));
}

namespace {

// Stacks one layer from every net; shared_input glues the first layer to a
// common input instead of concatenating the input spaces.
AffineLayer stack_layer(const std::vector<ModReLUNetwork>& nets, std::size_t li,
                        bool shared_input) {
    std::size_t rows = 0, cols = 0;
    bool any_mask = false;
    for (const ModReLUNetwork& n : nets) {
        rows += n.layers[li].rows;
        cols += n.layers[li].cols;
        any_mask = any_mask || n.layers[li].has_masks();
    }
    const bool glue = shared_input && li == 0;
    if (glue) cols = nets.front().layers[0].cols;
    AffineLayer out(rows, cols);
    const bool need_mask = nets.size() > 1 || any_mask;
    if (need_mask) {
        out.mask_A.assign(rows * cols, 0);
        out.mask_b.assign(rows, 0);
    }
    std::size_t ro = 0, co = 0;
    for (const ModReLUNetwork& n : nets) {
        const AffineLayer& l = n.layers[li];
        for (std::size_t i = 0; i < l.rows; ++i) {
            for (std::size_t j = 0; j < l.cols; ++j) {
                out.at(ro + i, co + j) = l.at(i, j);
                if (need_mask && l.allowed_A(i, j)) out.mask_A[(ro + i) * cols + co + j] = 1;
            }
            out.b[ro + i] = l.b[i];
            if (need_mask && l.allowed_b(i)) out.mask_b[ro + i] = 1;
        }
        ro += l.rows;
        if (!glue) co += l.cols;
    }
    return out;
}

void check_equal_depths(const std::vector<ModReLUNetwork>& nets, const char* what) {
    if (nets.empty()) throw ParamError(std::string(what) + " needs at least one net");
    for (const ModReLUNetwork& n : nets)
        if (n.depth() != nets.front().depth())
            throw DimensionError(std::string(what) + " requires equal depths");
}

}  // namespace

ModReLUNetwork parallel(const std::vector<ModReLUNetwork>& nets) {
    check_equal_depths(nets, "parallel");
    std::vector<AffineLayer> ls;
    ls.reserve(nets.front().depth());
    for (std::size_t li = 0; li < nets.front().depth(); ++li)
        ls.push_back(stack_layer(nets, li, false));
    return ModReLUNetwork(std::move(ls));
}

ModReLUNetwork parallel_shared(const std::vector<ModReLUNetwork>& nets) {
    check_equal_depths(nets, "parallel_shared");
    for (const ModReLUNetwork& n : nets)
        if (n.input_dim() != nets.front().input_dim())
            throw DimensionError("parallel_shared requires one common input dim");
    std::vector<AffineLayer> ls;
    ls.reserve(nets.front().depth());
    for (std::size_t li = 0; li < nets.front().depth(); ++li)
        ls.push_back(stack_layer(nets, li, true));
    return ModReLUNetwork(std::move(ls));
}

ModReLUNetwork weighted_sum_flat(const std::vector<ModReLUNetwork>& nets,
                                 const std::vector<cplx>& coeffs, cplx bias) {
    check_equal_depths(nets, "weighted_sum_flat");
    if (nets.size() != coeffs.size()) throw DimensionError("one coefficient per net required");
    for (const ModReLUNetwork& n : nets) {
        if (n.input_dim() != nets.front().input_dim())
            throw DimensionError("weighted_sum_flat requires one common input dim");
        if (n.output_dim() != 1)
            throw DimensionError("weighted_sum_flat requires scalar outputs");
    }
    for (const cplx& c : coeffs) require_finite(c, "weighted sum coefficient");
    require_finite(bias, "weighted sum bias");

    const std::size_t depth = nets.front().depth();
    if (depth == 1) {
        const std::size_t d = nets.front().input_dim();
        AffineLayer top(1, d);
        cplx acc = bias;
        bool any_mask = false;
        for (const ModReLUNetwork& n : nets) any_mask = any_mask || n.layers[0].has_masks();
        if (any_mask || bias != cplx(0.0, 0.0)) {
            top.mask_A.assign(d, 0);
            top.mask_b.assign(1, bias != cplx(0.0, 0.0) ? 1 : 0);
        }
        for (std::size_t k = 0; k < nets.size(); ++k) {
            const AffineLayer& l = nets[k].layers[0];
            acc += coeffs[k] * l.b[0];
            for (std::size_t j = 0; j < d; ++j) {
                top.at(0, j) += coeffs[k] * l.at(0, j);
                if (!top.mask_A.empty() && l.allowed_A(0, j)) top.mask_A[j] = 1;
            }
            if (!top.mask_b.empty() && l.allowed_b(0)) top.mask_b[0] = 1;
        }
        top.b[0] = acc;
        if (!top.mask_b.empty() && !top.mask_b[0]) top.b[0] = cplx(0.0, 0.0);
        return affine_net(std::move(top));
    }

    std::vector<AffineLayer> ls;
    ls.reserve(depth);
    for (std::size_t li = 0; li + 1 < depth; ++li)
        ls.push_back(stack_layer(nets, li, li == 0));
    std::size_t wsum = 0;
    for (const ModReLUNetwork& n : nets) wsum += n.layers[depth - 1].cols;
    AffineLayer top(1, wsum);
    top.mask_A.assign(wsum, 0);
    top.mask_b.assign(1, 0);
    cplx acc = bias;
    std::size_t co = 0;
    bool bias_allowed = bias != cplx(0.0, 0.0);
    for (std::size_t k = 0; k < nets.size(); ++k) {
        const AffineLayer& l = nets[k].layers[depth - 1];
        acc += coeffs[k] * l.b[0];
        bias_allowed = bias_allowed || l.allowed_b(0);
        for (std::size_t j = 0; j < l.cols; ++j) {
            top.at(0, co + j) = coeffs[k] * l.at(0, j);
            if (l.allowed_A(0, j)) top.mask_A[co + j] = 1;
            else top.at(0, co + j) = cplx(0.0, 0.0);
        }
        co += l.cols;
    }
    top.mask_b[0] = bias_allowed ? 1 : 0;
    top.b[0] = bias_allowed ? acc : cplx(0.0, 0.0);
    ls.push_back(std::move(top));
    return ModReLUNetwork(std::move(ls));
}

ModReLUNetwork pad_depth(const ModReLUNetwork& net, std::size_t target_depth, double radius) {
    if (target_depth < net.depth())
        throw ParamError("pad_depth cannot shrink a network");
    ModReLUNetwork out = net;
    while (out.depth() < target_depth)
        out = compose(identity_net(out.output_dim(), radius), out);
    return out;
}

}  // namespace modrelu
