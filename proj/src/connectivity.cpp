#include "xbar/connectivity.hpp"

#include <ostream>

#include "text_util.hpp"

namespace xbar {

std::vector<Synapse> enumerate_padded_taps(const NetworkSpec& spec, const WeightStore& weights,
                                           int layer) {
    if (layer < 1 || layer > spec.layer_count())
        throw SpecError("layer " + std::to_string(layer) + " out of range");
    const LayerSpec& ls = spec.layers[static_cast<std::size_t>(layer) - 1];
    const TensorShape& in = ls.in_shape;
    const TensorShape& out = ls.out_shape;

    std::vector<Synapse> taps;
    if (ls.kind == LayerKind::Fc) {
        taps.reserve(static_cast<std::size_t>(out.channels) * static_cast<std::size_t>(in.count()));
        for (int f = 1; f <= out.channels; ++f) {
            NeuronId dst{layer, f, 1, 1, false};
            for (int i = 0; i < in.count(); ++i) {
                Synapse s;
                s.src = neuron_at(layer - 1, i, in);
                s.dst = dst;
                s.weight = weights.fc(layer, f - 1, i);
                s.tap = {0, 0, 0};
                taps.push_back(s);
            }
        }
        return taps;
    }

    taps.reserve(static_cast<std::size_t>(out.count()) *
                 static_cast<std::size_t>(ls.filter_h * ls.filter_w * in.channels));
    for (int r = 1; r <= out.height; ++r) {
        for (int c = 1; c <= out.width; ++c) {
            for (int f = 1; f <= out.channels; ++f) {
                NeuronId dst{layer, f, r, c, false};
                for (int kr = 0; kr < ls.filter_h; ++kr) {
                    for (int kc = 0; kc < ls.filter_w; ++kc) {
                        // Source coordinates on the real grid; the padding
                        // ring falls outside [1, H] x [1, W].
                        const int sr = (r - 1) * ls.stride_h + kr + 1 - ls.pad.top;
                        const int sc = (c - 1) * ls.stride_w + kc + 1 - ls.pad.left;
                        const bool pad =
                            sr < 1 || sr > in.height || sc < 1 || sc > in.width;
                        for (int ic = 0; ic < in.channels; ++ic) {
                            Synapse s;
                            s.src = NeuronId{layer - 1, ic + 1, sr, sc, pad};
                            s.dst = dst;
                            s.weight = weights.conv(layer, f - 1, ic, kr, kc);
                            s.tap = {kr, kc, ic};
                            taps.push_back(s);
                        }
                    }
                }
            }
        }
    }
    return taps;
}

ConnectivityList virtual_pad_then_prune(const LayerSpec& dst_layer, std::vector<Synapse> raw) {
    const TensorShape& out = dst_layer.out_shape;
    ConnectivityList conn;
    conn.layer = dst_layer.index;
    conn.fan_in.assign(static_cast<std::size_t>(out.count()), 0);
    conn.synapses.reserve(raw.size());
    for (Synapse& s : raw) {
        if (s.src.virtual_pad) continue;
        conn.fan_in[static_cast<std::size_t>(neuron_index(s.dst, out))]++;
        conn.synapses.push_back(s);
    }
    // Canonical enumeration order groups each destination's taps contiguously
    // and in destination linear-index order, so prefix sums index them.
    conn.dst_offset.assign(conn.fan_in.size() + 1, 0);
    for (std::size_t d = 0; d < conn.fan_in.size(); ++d)
        conn.dst_offset[d + 1] = conn.dst_offset[d] + conn.fan_in[d];
    if (conn.dst_offset.back() != static_cast<int>(conn.synapses.size()))
        throw Error("connectivity indexing out of step");
    return conn;
}

ConnectivityList build_connectivity(const NetworkSpec& spec, const WeightStore& weights,
                                    int layer) {
    std::vector<Synapse> raw = enumerate_padded_taps(spec, weights, layer);
    return virtual_pad_then_prune(spec.layers[static_cast<std::size_t>(layer) - 1],
                                  std::move(raw));
}

void write_connectivity_csv(const ConnectivityList& conn, std::ostream& os) {
    os << "src,dst,weight,krow,kcol,inch\n";
    for (const Synapse& s : conn.synapses) {
        os << to_string(s.src) << ',' << to_string(s.dst) << ',' << format_float(s.weight) << ','
           << s.tap.kernel_row << ',' << s.tap.kernel_col << ',' << s.tap.in_channel << '\n';
    }
}

}  // namespace xbar
