#pragma once

#include <iosfwd>
#include <vector>

#include "xbar/ir.hpp"

namespace xbar {

// One kernel tap: kernel row/col and input channel, all 0-based.
// FC synapses use (0, 0, 0).
struct Tap {
    int kernel_row = 0;
    int kernel_col = 0;
    int in_channel = 0;
    bool operator==(const Tap&) const = default;
};

struct Synapse {
    NeuronId src;
    NeuronId dst;
    float weight = 0.0f;
    Tap tap;
};

// Full synapse table of one layer in canonical order: destinations row-major
// then feature, taps kernel-row-major then input channel.
struct ConnectivityList {
    int layer = 0;
    std::vector<Synapse> synapses;
    // Per destination neuron (layer linear index order).
    std::vector<int> fan_in;
    // Prefix offsets into `synapses`, size dst_count + 1. The synapses of
    // destination d occupy [dst_offset[d], dst_offset[d+1]).
    std::vector<int> dst_offset;
};

// Raw tap enumeration over the padded source grid: every (dst, tap) pair is
// present, sources that fall into the padding ring carry virtual ids.
std::vector<Synapse> enumerate_padded_taps(const NetworkSpec& spec, const WeightStore& weights,
                                           int layer);

// Drops virtual-source taps and indexes the survivors. `raw` must be in
// canonical enumeration order.
ConnectivityList virtual_pad_then_prune(const LayerSpec& dst_layer, std::vector<Synapse> raw);

// enumerate_padded_taps followed by virtual_pad_then_prune.
ConnectivityList build_connectivity(const NetworkSpec& spec, const WeightStore& weights, int layer);

// Debug dump: header "src,dst,weight,krow,kcol,inch".
void write_connectivity_csv(const ConnectivityList& conn, std::ostream& os);

}  // namespace xbar
