#pragma once

#include "modrelu/structured.hpp"

#include <string>
#include <string_view>

namespace modrelu {

// JSON with every double printed via %.17g, so values round-trip exactly.
std::string serialize(const ModReLUNetwork& net, const std::string& meta_json = "");
std::string serialize(const StructuredNet& net, const std::string& meta_json = "");

ModReLUNetwork deserialize_network(std::string_view bytes);
StructuredNet deserialize_structured(std::string_view bytes);

// Either flavor, dispatched on the format tag.
struct LoadedNet {
    bool is_structured = false;
    ModReLUNetwork flat;
    StructuredNet structured;
    std::string meta_json;  // raw "meta" object text, empty if absent

    std::size_t input_dim() const { return is_structured ? structured.input_dim() : flat.input_dim(); }
    std::size_t output_dim() const { return is_structured ? structured.output_dim() : flat.output_dim(); }
    ArchitectureStats stats() const { return is_structured ? structured.stats() : flat.stats(); }
    Batch evaluate_batch(const Batch& in) const;
};

LoadedNet load_network(std::string_view bytes);

}  // namespace modrelu
