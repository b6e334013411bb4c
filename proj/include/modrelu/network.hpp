#pragma once

#include "modrelu/complex_ops.hpp"

#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace modrelu {

// Batch of complex column vectors in split-plane layout.
// Entry (i, p) lives at re[i*count + p], im[i*count + p].
struct Batch {
    std::size_t width = 0;
    std::size_t count = 0;
    std::vector<double> re;
    std::vector<double> im;

    Batch() = default;
    Batch(std::size_t w, std::size_t n)
        : width(w), count(n), re(w * n, 0.0), im(w * n, 0.0) {}

    double* row_re(std::size_t i) { return re.data() + i * count; }
    double* row_im(std::size_t i) { return im.data() + i * count; }
    const double* row_re(std::size_t i) const { return re.data() + i * count; }
    const double* row_im(std::size_t i) const { return im.data() + i * count; }

    cplx at(std::size_t i, std::size_t p) const {
        return cplx(re[i * count + p], im[i * count + p]);
    }
    void set(std::size_t i, std::size_t p, cplx v) {
        re[i * count + p] = v.real();
        im[i * count + p] = v.imag();
    }
};

// Recycles exact-shape batch buffers so hot evaluation paths do not pay an
// allocation plus zero-fill per layer. Recycled buffers hold stale values;
// every consumer overwrites them in full before reading.
struct BatchPool {
    std::unordered_map<std::uint64_t, std::vector<Batch>> buckets;

    Batch acquire(std::size_t width, std::size_t count);
    void release(Batch&& b);
};

// Complex affine map x -> A x + b with optional sparsity masks.
// A is row-major (rows x cols). A mask entry of 0 pins that slot to zero;
// whenever a mask is present, every disallowed slot must hold exactly 0.
// Absent masks mean every slot is allowed.
struct AffineLayer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<cplx> A;
    std::vector<cplx> b;
    std::vector<std::uint8_t> mask_A;
    std::vector<std::uint8_t> mask_b;

    AffineLayer() = default;
    AffineLayer(std::size_t r, std::size_t c)
        : rows(r), cols(c), A(r * c, cplx(0.0, 0.0)), b(r, cplx(0.0, 0.0)) {}

    cplx& at(std::size_t i, std::size_t j) { return A[i * cols + j]; }
    cplx at(std::size_t i, std::size_t j) const { return A[i * cols + j]; }

    bool allowed_A(std::size_t i, std::size_t j) const {
        return mask_A.empty() || mask_A[i * cols + j] != 0;
    }
    bool allowed_b(std::size_t i) const {
        return mask_b.empty() || mask_b[i] != 0;
    }
    bool has_masks() const { return !mask_A.empty() || !mask_b.empty(); }

    // Fills masks with the current nonzero pattern.
    void mask_from_values();
    void validate() const;
};

struct ArchitectureStats {
    std::size_t depth = 0;
    std::vector<std::size_t> neuron_counts;  // N_0 .. N_L including input and output
    std::size_t total_neurons = 0;
    std::size_t weight_count = 0;            // allowed slots across all A and b
    double max_weight_magnitude = 0.0;

    std::size_t hidden_neurons() const {
        std::size_t h = 0;
        for (std::size_t l = 1; l + 1 < neuron_counts.size(); ++l) h += neuron_counts[l];
        return h;
    }
};

// Feed-forward net: affine layers with modReLU between them (not after the last).
class ModReLUNetwork {
public:
    std::vector<AffineLayer> layers;

    ModReLUNetwork() = default;
    explicit ModReLUNetwork(std::vector<AffineLayer> ls);

    std::size_t depth() const { return layers.size(); }
    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().cols; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().rows; }

    std::vector<cplx> evaluate(const std::vector<cplx>& x) const;
    // Replaces io (width input_dim) by the outputs (width output_dim).
    // A pool, when given, supplies and reclaims the per-layer buffers,
    // including io's original storage.
    void evaluate_batch(Batch& io, BatchPool* pool = nullptr) const;

    ArchitectureStats stats() const;
    // Count of entries that are actually nonzero, ignoring masks.
    std::size_t nonzero_weight_count() const;

    void validate() const;
};

// Exact identity on |z| <= radius, applied coordinate-wise; depth 2.
ModReLUNetwork identity_net(std::size_t dim, double radius);

// Wraps a single affine map as a depth-1 net.
ModReLUNetwork affine_net(AffineLayer layer);

// Realization = outer after inner; depth L_outer + L_inner - 1.
// The boundary affines fuse; masks propagate through the boolean product.
ModReLUNetwork compose(const ModReLUNetwork& outer, const ModReLUNetwork& inner);

// Block-diagonal stacking; inputs are concatenated. Requires equal depths.
ModReLUNetwork parallel(const std::vector<ModReLUNetwork>& nets);

// Stacking over one common input vector. Requires equal depths and input dims.
ModReLUNetwork parallel_shared(const std::vector<ModReLUNetwork>& nets);

// sum_i coeffs[i] * net_i(x) + bias as a single flat net.
// Requires equal depths, shared input dim, and scalar outputs.
ModReLUNetwork weighted_sum_flat(const std::vector<ModReLUNetwork>& nets,
                                 const std::vector<cplx>& coeffs, cplx bias);

// Appends identity stages until the depth reaches target_depth.
// Exact as long as outputs stay inside |z| <= radius.
ModReLUNetwork pad_depth(const ModReLUNetwork& net, std::size_t target_depth, double radius);

inline ArchitectureStats stats(const ModReLUNetwork& net) { return net.stats(); }

}  // namespace modrelu
