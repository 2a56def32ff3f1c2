#pragma once

#include <vector>

#include "xbar/connectivity.hpp"
#include "xbar/ir.hpp"

namespace xbar {

// Physical dimensions of one crossbar core: axons are input word lines,
// neurons are output bit lines.
struct CoreSpec {
    int axons = 256;
    int neurons = 256;
    bool operator==(const CoreSpec&) const = default;
};

// Chosen tile for one layer. A full interior core holds a neuron_rows x
// neuron_cols spatial block for channels_per_core output channels;
// axons_used/neurons_used is the utilization tuple of such a core.
struct TilePlan {
    int layer = 0;
    int neuron_rows = 1;
    int neuron_cols = 1;
    int channels_per_core = 1;
    long long axons_used = 0;
    long long neurons_used = 0;
};

struct CoreAllocation {
    int core_id = 0;
    int layer = 0;
    std::vector<NeuronId> axon_slots;    // axon index -> source neuron
    std::vector<NeuronId> neuron_slots;  // neuron index -> destination neuron
    std::vector<float> weights;          // axon-major, axon_count() x neuron_count()

    int axon_count() const { return static_cast<int>(axon_slots.size()); }
    int neuron_count() const { return static_cast<int>(neuron_slots.size()); }
    float weight_at(int axon, int neuron) const {
        return weights[static_cast<std::size_t>(axon) * static_cast<std::size_t>(neuron_count()) +
                       static_cast<std::size_t>(neuron)];
    }
};

struct MappingResult {
    NetworkSpec spec;
    CoreSpec core;
    std::vector<TilePlan> plans;          // per layer; empty when reloaded from artifacts
    std::vector<CoreAllocation> cores;    // core_id order == layer-major order
    std::vector<int> layer_core_offsets;  // size layer_count()+1, indexes into `cores`

    int total_cores() const { return static_cast<int>(cores.size()); }
    int layer_core_count(int layer) const {
        return layer_core_offsets[static_cast<std::size_t>(layer)] -
               layer_core_offsets[static_cast<std::size_t>(layer) - 1];
    }
};

// Axons one core needs for a neuron_rows x neuron_cols tile of one input
// channel, filter K, stride S, when overlapping receptive fields share axons:
// (K + S*(rows-1)) * (K + S*(cols-1)).
long long axons_required(int filter, int stride, int neuron_rows, int neuron_cols);

// Pick the tile minimizing the layer's core count: maximize neurons_used,
// then minimize axons_used, then |rows - cols|, then prefer rows <= cols.
// Throws SpecError when a single neuron's fan-in exceeds the axon capacity.
TilePlan choose_tile_shape(const LayerSpec& layer, const CoreSpec& core);

// Instantiate the plan: one core per (channel group, spatial block), edge
// blocks clipped to the layer extent. Core ids are layer-local 0..n-1 here.
std::vector<CoreAllocation> map_layer(const TilePlan& plan, const ConnectivityList& conn,
                                      const NetworkSpec& spec, const CoreSpec& core);

// Full pipeline over all layers; core ids are global and layer-major.
MappingResult map_network(const NetworkSpec& spec, const WeightStore& weights,
                          const CoreSpec& core);

}  // namespace xbar
