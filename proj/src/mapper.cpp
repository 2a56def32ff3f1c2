#include "xbar/mapper.hpp"

#include <algorithm>
#include <cstdlib>
#include <tuple>
#include <unordered_map>
#include <utility>

namespace xbar {

long long axons_required(int filter, int stride, int neuron_rows, int neuron_cols) {
    if (filter < 1 || stride < 1 || neuron_rows < 1 || neuron_cols < 1)
        throw SpecError("axons_required: arguments must be >= 1");
    const long long eh = filter + static_cast<long long>(stride) * (neuron_rows - 1);
    const long long ew = filter + static_cast<long long>(stride) * (neuron_cols - 1);
    return eh * ew;
}

namespace {

// Anisotropic variant used internally; the public axons_required covers the
// square filter-and-stride case.
long long tile_axons(const LayerSpec& ls, int rows, int cols) {
    const long long eh = ls.filter_h + static_cast<long long>(ls.stride_h) * (rows - 1);
    const long long ew = ls.filter_w + static_cast<long long>(ls.stride_w) * (cols - 1);
    return eh * ew * ls.in_shape.channels;
}

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

}  // namespace

TilePlan choose_tile_shape(const LayerSpec& layer, const CoreSpec& core) {
    if (core.axons < 1 || core.neurons < 1)
        throw SpecError("core capacities must be >= 1");

    TilePlan plan;
    plan.layer = layer.index;

    if (layer.kind == LayerKind::Fc) {
        const long long fan_in = layer.in_shape.count();
        if (fan_in > core.axons)
            throw SpecError("layer " + std::to_string(layer.index) + ": fully-connected fan-in " +
                            std::to_string(fan_in) + " exceeds axon capacity " +
                            std::to_string(core.axons) + "; split the layer across cores");
        plan.neuron_rows = 1;
        plan.neuron_cols = 1;
        plan.channels_per_core = std::min(layer.out_channels, core.neurons);
        plan.axons_used = fan_in;
        plan.neurons_used = plan.channels_per_core;
        return plan;
    }

    const long long fan_in =
        static_cast<long long>(layer.filter_h) * layer.filter_w * layer.in_shape.channels;
    if (fan_in > core.axons)
        throw SpecError("layer " + std::to_string(layer.index) + ": neuron fan-in " +
                        std::to_string(fan_in) + " exceeds axon capacity " +
                        std::to_string(core.axons));

    const TensorShape& out = layer.out_shape;
    bool found = false;
    long long best_neurons = 0, best_axons = 0;
    int best_r = 1, best_c = 1, best_cp = 1;

    for (int r = 1; r <= out.height; ++r) {
        if (tile_axons(layer, r, 1) > core.axons) break;
        for (int c = 1; c <= out.width; ++c) {
            const long long axons = tile_axons(layer, r, c);
            if (axons > core.axons) break;
            const int spatial = r * c;
            if (spatial > core.neurons) break;
            // Smaller channel counts never win any objective, so only the
            // largest feasible channels_per_core is a candidate.
            const int cp = std::min(layer.out_channels, core.neurons / spatial);
            const long long neurons = static_cast<long long>(spatial) * cp;
            const auto cand = std::make_tuple(-neurons, axons, std::abs(r - c), r > c ? 1 : 0, r);
            const auto best =
                std::make_tuple(-best_neurons, best_axons, std::abs(best_r - best_c),
                                best_r > best_c ? 1 : 0, best_r);
            if (!found || cand < best) {
                found = true;
                best_neurons = neurons;
                best_axons = axons;
                best_r = r;
                best_c = c;
                best_cp = cp;
            }
        }
    }
    if (!found)
        throw SpecError("layer " + std::to_string(layer.index) +
                        ": no feasible tile under core [" + std::to_string(core.axons) + "," +
                        std::to_string(core.neurons) + "]");

    plan.neuron_rows = best_r;
    plan.neuron_cols = best_c;
    plan.channels_per_core = best_cp;
    plan.axons_used = best_axons;
    plan.neurons_used = best_neurons;
    return plan;
}

std::vector<CoreAllocation> map_layer(const TilePlan& plan, const ConnectivityList& conn,
                                      const NetworkSpec& spec, const CoreSpec& core) {
    if (plan.layer != conn.layer)
        throw SpecError("tile plan is for layer " + std::to_string(plan.layer) +
                        ", connectivity for layer " + std::to_string(conn.layer));
    const LayerSpec& layer = spec.layers.at(static_cast<std::size_t>(plan.layer) - 1);
    const TensorShape& out = layer.out_shape;

    const int tr = plan.neuron_rows, tc = plan.neuron_cols, cp = plan.channels_per_core;
    const int row_blocks = static_cast<int>(ceil_div(out.height, tr));
    const int col_blocks = static_cast<int>(ceil_div(out.width, tc));
    const int groups = static_cast<int>(ceil_div(out.channels, cp));

    std::vector<CoreAllocation> cores;
    cores.reserve(static_cast<std::size_t>(row_blocks) * col_blocks * groups);

    for (int g = 0; g < groups; ++g) {
        const int f0 = g * cp + 1;
        const int f1 = std::min(out.channels, (g + 1) * cp);
        for (int br = 0; br < row_blocks; ++br) {
            const int r0 = br * tr + 1;
            const int r1 = std::min(out.height, (br + 1) * tr);
            for (int bc = 0; bc < col_blocks; ++bc) {
                const int c0 = bc * tc + 1;
                const int c1 = std::min(out.width, (bc + 1) * tc);

                CoreAllocation alloc;
                alloc.core_id = static_cast<int>(cores.size());
                alloc.layer = plan.layer;
                for (int r = r0; r <= r1; ++r)
                    for (int c = c0; c <= c1; ++c)
                        for (int f = f0; f <= f1; ++f)
                            alloc.neuron_slots.push_back(NeuronId{plan.layer, f, r, c, false});

                // Axon slots in first-occurrence order over (neuron slot, tap).
                std::unordered_map<std::int64_t, int> axon_of;
                axon_of.reserve(static_cast<std::size_t>(plan.axons_used) * 2);
                for (const NeuronId& dst : alloc.neuron_slots) {
                    const int d = neuron_index(dst, out);
                    for (int k = conn.dst_offset[static_cast<std::size_t>(d)];
                         k < conn.dst_offset[static_cast<std::size_t>(d) + 1]; ++k) {
                        const NeuronId& src = conn.synapses[static_cast<std::size_t>(k)].src;
                        const std::int64_t key = neuron_key(src);
                        if (axon_of.emplace(key, alloc.axon_count()).second)
                            alloc.axon_slots.push_back(src);
                    }
                }

                const std::size_t n_cols = alloc.neuron_slots.size();
                alloc.weights.assign(alloc.axon_slots.size() * n_cols, 0.0f);
                for (std::size_t n = 0; n < n_cols; ++n) {
                    const int d = neuron_index(alloc.neuron_slots[n], out);
                    for (int k = conn.dst_offset[static_cast<std::size_t>(d)];
                         k < conn.dst_offset[static_cast<std::size_t>(d) + 1]; ++k) {
                        const Synapse& s = conn.synapses[static_cast<std::size_t>(k)];
                        const int a = axon_of.at(neuron_key(s.src));
                        alloc.weights[static_cast<std::size_t>(a) * n_cols + n] = s.weight;
                    }
                }

                if (alloc.axon_count() > core.axons || alloc.neuron_count() > core.neurons)
                    throw Error("layer " + std::to_string(plan.layer) + " core " +
                                std::to_string(alloc.core_id) + " exceeds capacity [" +
                                std::to_string(alloc.axon_count()) + "," +
                                std::to_string(alloc.neuron_count()) + "]");
                cores.push_back(std::move(alloc));
            }
        }
    }
    return cores;
}

MappingResult map_network(const NetworkSpec& spec, const WeightStore& weights,
                          const CoreSpec& core) {
    const int n_layers = spec.layer_count();
    std::vector<TilePlan> plans(static_cast<std::size_t>(n_layers));
    std::vector<std::vector<CoreAllocation>> per_layer(static_cast<std::size_t>(n_layers));

    // Layers are independent until renumbering. Exceptions must not escape the
    // parallel region; keep the first by layer order.
    std::vector<std::string> fails(static_cast<std::size_t>(n_layers));
    std::vector<char> failed(static_cast<std::size_t>(n_layers), 0);
#pragma omp parallel for schedule(dynamic)
    for (int l = 1; l <= n_layers; ++l) {
        try {
            const LayerSpec& ls = spec.layers[static_cast<std::size_t>(l) - 1];
            const ConnectivityList conn = build_connectivity(spec, weights, l);
            plans[static_cast<std::size_t>(l) - 1] = choose_tile_shape(ls, core);
            per_layer[static_cast<std::size_t>(l) - 1] =
                map_layer(plans[static_cast<std::size_t>(l) - 1], conn, spec, core);
        } catch (const std::exception& e) {
            failed[static_cast<std::size_t>(l) - 1] = 1;
            fails[static_cast<std::size_t>(l) - 1] = e.what();
        }
    }
    for (int l = 0; l < n_layers; ++l)
        if (failed[static_cast<std::size_t>(l)])
            throw SpecError(fails[static_cast<std::size_t>(l)]);

    MappingResult res;
    res.spec = spec;
    res.core = core;
    res.plans = std::move(plans);
    res.layer_core_offsets.assign(static_cast<std::size_t>(n_layers) + 1, 0);
    for (int l = 0; l < n_layers; ++l) {
        res.layer_core_offsets[static_cast<std::size_t>(l) + 1] =
            res.layer_core_offsets[static_cast<std::size_t>(l)] +
            static_cast<int>(per_layer[static_cast<std::size_t>(l)].size());
        for (CoreAllocation& alloc : per_layer[static_cast<std::size_t>(l)]) {
            alloc.core_id = static_cast<int>(res.cores.size());
            res.cores.push_back(std::move(alloc));
        }
    }
    return res;
}

}  // namespace xbar
