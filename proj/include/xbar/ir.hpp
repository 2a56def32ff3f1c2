#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xbar/errors.hpp"

namespace xbar {

// Extent of an activation tensor. Every dimension is >= 1.
struct TensorShape {
    int height = 1;
    int width = 1;
    int channels = 1;

    int count() const { return height * width * channels; }
    bool operator==(const TensorShape&) const = default;
};

enum class LayerKind { Conv, Fc };

// Per-side zero padding (top, bottom, left, right).
struct PadSpec {
    int top = 0;
    int bottom = 0;
    int left = 0;
    int right = 0;
    bool operator==(const PadSpec&) const = default;
};

struct LayerSpec {
    int index = 0;  // 1-based position in the network
    LayerKind kind = LayerKind::Conv;
    int filter_h = 1;
    int filter_w = 1;
    int stride_h = 1;
    int stride_w = 1;
    PadSpec pad;            // conv only; fc covers the whole input
    int out_channels = 1;   // fc: output neuron count

    // Derived during validation, never read from the manifest.
    TensorShape in_shape;
    TensorShape out_shape;

    bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
    TensorShape input;
    std::vector<LayerSpec> layers;

    int layer_count() const { return static_cast<int>(layers.size()); }
    // Output shape of layer `n`; layer 0 is the input tensor.
    const TensorShape& shape_of(int layer) const;

    bool operator==(const NetworkSpec&) const = default;
};

// Canonical neuron address. layer 0 addresses the input tensor, where
// `feature` is the input channel. feature/row/col are 1-based.
struct NeuronId {
    int layer = 0;
    int feature = 1;
    int row = 1;
    int col = 1;
    // Padding placeholder produced during tap enumeration. Virtual ids carry
    // out-of-range row/col and must never survive into mappings or artifacts.
    bool virtual_pad = false;

    bool operator==(const NeuronId&) const = default;
};

// "L{layer}-F{feature}-N[{row},{col}]"
std::string to_string(const NeuronId& id);
// Strict inverse of to_string(); throws SpecError on malformed input.
NeuronId parse_neuron_id(const std::string& text);

// Row-major, channel-minor linear index of `id` within a layer of shape
// `shape`: ((row-1)*W + (col-1))*C + (feature-1). Throws on out-of-range ids.
int neuron_index(const NeuronId& id, const TensorShape& shape);
NeuronId neuron_at(int layer, int linear, const TensorShape& shape);

// Dense integer key for hashing/sorting real (non-virtual) ids.
std::int64_t neuron_key(const NeuronId& id);

// Output shape of a conv layer applied to `input` (floor division).
// Throws SpecError naming the layer when the filter exceeds the padded input
// or any resulting dimension would be < 1.
TensorShape conv_output_shape(const TensorShape& input, const LayerSpec& layer);

// Parse and validate a network manifest (JSON text). Resolves the full shape
// chain; any schema or shape violation throws SpecError naming layer and field.
NetworkSpec parse_network(const std::string& manifest_text);
std::string serialize_network(const NetworkSpec& spec);

// Weights for one layer, flat row-major.
// conv: shape {out_ch, in_ch, k_h, k_w}; fc: shape {out, in}.
struct LayerWeights {
    std::vector<int> shape;
    std::vector<float> values;

    int count() const;
};

class WeightStore {
public:
    WeightStore() = default;
    explicit WeightStore(std::vector<LayerWeights> layers) : layers_(std::move(layers)) {}

    int layer_count() const { return static_cast<int>(layers_.size()); }
    const LayerWeights& layer(int index) const;  // 1-based

    // All sub-indices 0-based.
    float conv(int layer, int out_c, int in_c, int k_row, int k_col) const;
    float fc(int layer, int out, int in) const;

private:
    std::vector<LayerWeights> layers_;
};

// Decode a raw float32 little-endian blob against its manifest (JSON list of
// {layer, shape, offset_bytes, length_bytes}). Layers are concatenated in
// network order. Size or shape mismatches throw SpecError naming expected vs
// actual byte counts.
WeightStore load_weights(const NetworkSpec& spec, const std::vector<std::uint8_t>& blob,
                         const std::string& manifest_json);

// Inverse pair of load_weights, used by fixture generators and round-trips.
std::vector<std::uint8_t> serialize_weights(const NetworkSpec& spec, const WeightStore& weights);
std::string weight_manifest_json(const NetworkSpec& spec);

// All-zero store with the shapes the network requires.
WeightStore zero_weights(const NetworkSpec& spec);

}  // namespace xbar
