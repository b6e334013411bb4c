#pragma once

#include "modrelu/network.hpp"

#include <memory>
#include <string>
#include <vector>

namespace modrelu {

// A leaf may be tagged as an extractor gadget. The tag does not change the
// represented network; it routes batch evaluation through a closed form of
// the same function that avoids the cancellation the layer form suffers at
// small h. Flat evaluation of the identical layers is kept for tests.
enum class GadgetKind : std::uint8_t { None = 0, ReExtract = 1, ImExtract = 2 };

struct StructuredNode;
using NodePtr = std::shared_ptr<const StructuredNode>;

struct StructuredNode {
    enum class Kind : std::uint8_t { Leaf, Serial, Parallel, WeightedSum };
    Kind kind = Kind::Leaf;

    // Leaf payload
    ModReLUNetwork net;
    GadgetKind gadget = GadgetKind::None;
    double gadget_h = 0.0;

    // Serial: children applied first to last.
    // Parallel: outputs concatenated; shared_input reuses one input vector.
    // WeightedSum: scalar children, out = sum coeffs[k]*child_k + bias.
    std::vector<NodePtr> children;
    bool shared_input = false;
    std::vector<cplx> coeffs;
    cplx bias{0.0, 0.0};

    // cached extents
    std::size_t depth_cache = 0;
    std::size_t din_cache = 0;
    std::size_t dout_cache = 0;
};

class StructuredNet {
public:
    StructuredNet() = default;
    StructuredNet(ModReLUNetwork net);  // NOLINT: leaf wrapping is the point
    explicit StructuredNet(NodePtr root);

    static StructuredNet leaf_gadget(ModReLUNetwork net, GadgetKind g, double h);
    static StructuredNet serial(std::vector<StructuredNet> stages);
    static StructuredNet parallel_of(std::vector<StructuredNet> branches, bool shared_input);
    static StructuredNet weighted(std::vector<StructuredNet> terms, std::vector<cplx> coeffs,
                                  cplx bias);

    bool empty() const { return !root_; }
    std::size_t depth() const;
    std::size_t input_dim() const;
    std::size_t output_dim() const;

    std::vector<cplx> evaluate(const std::vector<cplx>& x) const;
    Batch evaluate_batch(const Batch& in) const;

    ArchitectureStats stats() const;

    // Materializes one flat net with the same realization. Throws when the
    // dense representation would exceed max_elements matrix/bias entries.
    ModReLUNetwork flatten(std::size_t max_elements = 5000000) const;

    // Hash over kinds, dims and mask patterns; weight values do not enter.
    std::string fingerprint() const;

    const NodePtr& root() const { return root_; }

private:
    NodePtr root_;
};

// Spec-level combinator: requires equal depths, one shared input dim and
// scalar outputs; the result has the same depth as the summands.
StructuredNet weighted_sum(const std::vector<StructuredNet>& nets,
                           const std::vector<cplx>& coeffs, cplx bias);

StructuredNet pad_depth(const StructuredNet& net, std::size_t target_depth, double radius);

inline ArchitectureStats stats(const StructuredNet& net) { return net.stats(); }

}  // namespace modrelu
