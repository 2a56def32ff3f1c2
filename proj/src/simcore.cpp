#include "xbar/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "text_util.hpp"

namespace xbar {

std::vector<float> core_mvm(const CoreAllocation& core, const std::vector<float>& axon_input) {
    if (static_cast<int>(axon_input.size()) != core.axon_count())
        throw SpecError("core " + std::to_string(core.core_id) + ": axon input length " +
                        std::to_string(axon_input.size()) + ", expected " +
                        std::to_string(core.axon_count()));
    const int n_cols = core.neuron_count();
    std::vector<float> out(static_cast<std::size_t>(n_cols));
    for (int n = 0; n < n_cols; ++n) {
        double acc = 0.0;
        for (int a = 0; a < core.axon_count(); ++a)
            acc += static_cast<double>(core.weight_at(a, n)) *
                   static_cast<double>(axon_input[static_cast<std::size_t>(a)]);
        out[static_cast<std::size_t>(n)] = static_cast<float>(acc);
    }
    return out;
}

namespace {

struct SlotRef {
    int core = -1;
    int slot = -1;
};

// Validates the mapping's wiring once so the per-core kernels cannot fault:
// every neuron slot addresses its core's layer and is produced exactly once,
// every layer neuron has a producer, every axon slot reads the previous layer.
void validate_structure(const MappingResult& m) {
    const NetworkSpec& spec = m.spec;
    std::vector<std::vector<SlotRef>> producer(static_cast<std::size_t>(spec.layer_count()));
    for (int l = 1; l <= spec.layer_count(); ++l)
        producer[static_cast<std::size_t>(l) - 1].assign(
            static_cast<std::size_t>(spec.shape_of(l).count()), SlotRef{});

    for (const CoreAllocation& core : m.cores) {
        if (core.layer < 1 || core.layer > spec.layer_count())
            throw Error("core " + std::to_string(core.core_id) + " targets unknown layer " +
                        std::to_string(core.layer));
        const TensorShape& out = spec.shape_of(core.layer);
        const TensorShape& in = spec.shape_of(core.layer - 1);
        for (int n = 0; n < core.neuron_count(); ++n) {
            const NeuronId& dst = core.neuron_slots[static_cast<std::size_t>(n)];
            if (dst.layer != core.layer)
                throw Error("core " + std::to_string(core.core_id) + " holds foreign neuron " +
                            to_string(dst));
            SlotRef& ref =
                producer[static_cast<std::size_t>(core.layer) - 1]
                        [static_cast<std::size_t>(neuron_index(dst, out))];
            if (ref.core >= 0)
                throw Error("neuron " + to_string(dst) + " produced by cores " +
                            std::to_string(ref.core) + " and " + std::to_string(core.core_id));
            ref = {core.core_id, n};
        }
        for (const NeuronId& src : core.axon_slots) {
            if (src.layer != core.layer - 1)
                throw Error("core " + std::to_string(core.core_id) + " axon source " +
                            to_string(src) + " is not in layer " + std::to_string(core.layer - 1));
            (void)neuron_index(src, in);  // throws when outside the layer extent
        }
        if (core.weights.size() != static_cast<std::size_t>(core.axon_count()) *
                                       static_cast<std::size_t>(core.neuron_count()))
            throw Error("core " + std::to_string(core.core_id) + " weight matrix size mismatch");
    }

    for (int l = 1; l <= spec.layer_count(); ++l)
        for (int d = 0; d < spec.shape_of(l).count(); ++d)
            if (producer[static_cast<std::size_t>(l) - 1][static_cast<std::size_t>(d)].core < 0)
                throw Error("no core produces neuron " +
                            to_string(neuron_at(l, d, spec.shape_of(l))));
}

std::vector<float> gather_axons(const CoreAllocation& core, const Tensor& prev) {
    std::vector<float> x(static_cast<std::size_t>(core.axon_count()));
    for (int a = 0; a < core.axon_count(); ++a)
        x[static_cast<std::size_t>(a)] =
            prev.v[static_cast<std::size_t>(neuron_index(core.axon_slots[static_cast<std::size_t>(a)],
                                                         prev.shape))];
    return x;
}

float apply_act(float v, Activation act) {
    return act == Activation::Relu ? (v > 0.0f ? v : 0.0f) : v;
}

void check_input(const NetworkSpec& spec, const Tensor& input) {
    if (!(input.shape == spec.input) ||
        input.v.size() != static_cast<std::size_t>(spec.input.count()))
        throw SpecError("input tensor shape does not match network input " +
                        std::to_string(spec.input.height) + "x" + std::to_string(spec.input.width) +
                        "x" + std::to_string(spec.input.channels));
}

}  // namespace

std::vector<Tensor> run_mapped_inference(const MappingResult& mapping, const Tensor& input,
                                         Activation act) {
    check_input(mapping.spec, input);
    validate_structure(mapping);
    std::vector<Tensor> acts;
    acts.reserve(static_cast<std::size_t>(mapping.spec.layer_count()));
    const Tensor* prev = &input;
    for (int l = 1; l <= mapping.spec.layer_count(); ++l) {
        Tensor out = Tensor::zeros(mapping.spec.shape_of(l));
        const int begin = mapping.layer_core_offsets[static_cast<std::size_t>(l) - 1];
        const int end = mapping.layer_core_offsets[static_cast<std::size_t>(l)];
#pragma omp parallel for schedule(dynamic)
        for (int ci = begin; ci < end; ++ci) {
            const CoreAllocation& core = mapping.cores[static_cast<std::size_t>(ci)];
            const std::vector<float> y = core_mvm(core, gather_axons(core, *prev));
            // validate_structure guarantees disjoint slots across cores.
            for (int n = 0; n < core.neuron_count(); ++n)
                out.v[static_cast<std::size_t>(neuron_index(
                    core.neuron_slots[static_cast<std::size_t>(n)], out.shape))] =
                    apply_act(y[static_cast<std::size_t>(n)], act);
        }
        acts.push_back(std::move(out));
        prev = &acts.back();
    }
    return acts;
}

std::vector<Tensor> run_mapped_inference_serial(const MappingResult& mapping, const Tensor& input,
                                                Activation act) {
    check_input(mapping.spec, input);
    validate_structure(mapping);
    std::vector<Tensor> acts;
    const Tensor* prev = &input;
    for (int l = 1; l <= mapping.spec.layer_count(); ++l) {
        Tensor out = Tensor::zeros(mapping.spec.shape_of(l));
        for (int ci = mapping.layer_core_offsets[static_cast<std::size_t>(l) - 1];
             ci < mapping.layer_core_offsets[static_cast<std::size_t>(l)]; ++ci) {
            const CoreAllocation& core = mapping.cores[static_cast<std::size_t>(ci)];
            const std::vector<float> y = core_mvm(core, gather_axons(core, *prev));
            for (int n = 0; n < core.neuron_count(); ++n)
                out.v[static_cast<std::size_t>(neuron_index(
                    core.neuron_slots[static_cast<std::size_t>(n)], out.shape))] =
                    apply_act(y[static_cast<std::size_t>(n)], act);
        }
        acts.push_back(std::move(out));
        prev = &acts.back();
    }
    return acts;
}

namespace {

// Per-element conv sum in tap order (kernel row, kernel col, input channel),
// accumulated in double. Padding contributes zero by skipping.
double conv_acc(const LayerSpec& ls, const WeightStore& w, const Tensor& in, int r, int c,
                int oc) {
    double acc = 0.0;
    for (int kr = 0; kr < ls.filter_h; ++kr) {
        const int sr = (r - 1) * ls.stride_h + kr + 1 - ls.pad.top;
        if (sr < 1 || sr > in.shape.height) continue;
        for (int kc = 0; kc < ls.filter_w; ++kc) {
            const int sc = (c - 1) * ls.stride_w + kc + 1 - ls.pad.left;
            if (sc < 1 || sc > in.shape.width) continue;
            for (int ic = 0; ic < in.shape.channels; ++ic)
                acc += static_cast<double>(w.conv(ls.index, oc, ic, kr, kc)) *
                       static_cast<double>(in.at(sr, sc, ic + 1));
        }
    }
    return acc;
}

double fc_acc(const LayerSpec& ls, const WeightStore& w, const Tensor& in, int o) {
    double acc = 0.0;
    for (int i = 0; i < in.shape.count(); ++i)
        acc += static_cast<double>(w.fc(ls.index, o, i)) *
               static_cast<double>(in.v[static_cast<std::size_t>(i)]);
    return acc;
}

}  // namespace

std::vector<Tensor> dense_reference(const NetworkSpec& spec, const WeightStore& weights,
                                    const Tensor& input, Activation act) {
    check_input(spec, input);
    std::vector<Tensor> acts;
    const Tensor* prev = &input;
    for (const LayerSpec& ls : spec.layers) {
        Tensor out = Tensor::zeros(ls.out_shape);
        if (ls.kind == LayerKind::Conv) {
            const Tensor& in = *prev;
#pragma omp parallel for collapse(2) schedule(static)
            for (int r = 1; r <= ls.out_shape.height; ++r)
                for (int c = 1; c <= ls.out_shape.width; ++c)
                    for (int oc = 0; oc < ls.out_channels; ++oc)
                        out.at(r, c, oc + 1) =
                            apply_act(static_cast<float>(conv_acc(ls, weights, in, r, c, oc)), act);
        } else {
            const Tensor& in = *prev;
#pragma omp parallel for schedule(static)
            for (int o = 0; o < ls.out_channels; ++o)
                out.v[static_cast<std::size_t>(o)] =
                    apply_act(static_cast<float>(fc_acc(ls, weights, in, o)), act);
        }
        acts.push_back(std::move(out));
        prev = &acts.back();
    }
    return acts;
}

std::vector<Tensor> dense_reference_serial(const NetworkSpec& spec, const WeightStore& weights,
                                           const Tensor& input, Activation act) {
    check_input(spec, input);
    std::vector<Tensor> acts;
    const Tensor* prev = &input;
    for (const LayerSpec& ls : spec.layers) {
        Tensor out = Tensor::zeros(ls.out_shape);
        if (ls.kind == LayerKind::Conv) {
            for (int r = 1; r <= ls.out_shape.height; ++r)
                for (int c = 1; c <= ls.out_shape.width; ++c)
                    for (int oc = 0; oc < ls.out_channels; ++oc)
                        out.at(r, c, oc + 1) = apply_act(
                            static_cast<float>(conv_acc(ls, weights, *prev, r, c, oc)), act);
        } else {
            for (int o = 0; o < ls.out_channels; ++o)
                out.v[static_cast<std::size_t>(o)] =
                    apply_act(static_cast<float>(fc_acc(ls, weights, *prev, o)), act);
        }
        acts.push_back(std::move(out));
        prev = &acts.back();
    }
    return acts;
}

double deviation(float a, float b) {
    const double da = a, db = b;
    return std::abs(da - db) / std::max({1.0, std::abs(da), std::abs(db)});
}

VerificationReport verify(const MappingResult& mapping, const NetworkSpec& spec,
                          const WeightStore& weights, const Tensor& input, double tolerance,
                          Activation act) {
    const std::vector<Tensor> mapped = run_mapped_inference(mapping, input, act);
    const std::vector<Tensor> dense = dense_reference(spec, weights, input, act);
    if (mapped.size() != dense.size())
        throw Error("mapped and reference layer counts differ");

    VerificationReport report;
    report.tolerance = tolerance;
    for (int l = 1; l <= spec.layer_count(); ++l) {
        const Tensor& a = mapped[static_cast<std::size_t>(l) - 1];
        const Tensor& b = dense[static_cast<std::size_t>(l) - 1];
        LayerCheck check;
        check.layer = l;
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            const double d = deviation(a.v[i], b.v[i]);
            check.max_deviation = std::max(check.max_deviation, d);
            if (d > tolerance && !check.first_mismatch)
                check.first_mismatch = neuron_at(l, static_cast<int>(i), a.shape);
        }
        check.pass = !check.first_mismatch.has_value();
        report.max_deviation = std::max(report.max_deviation, check.max_deviation);
        if (!check.pass && !report.first_mismatch) report.first_mismatch = check.first_mismatch;
        report.pass = report.pass && check.pass;
        report.layers.push_back(check);
    }
    return report;
}

namespace {

void check_lif_params(const LifParams& p) {
    if (!(p.tau_m > 0.0) || !(p.dt > 0.0))
        throw SpecError("lif: tau_m and dt must be > 0");
    if (p.dt > p.tau_m)
        throw SpecError("lif: dt " + std::to_string(p.dt) + " exceeds tau_m " +
                        std::to_string(p.tau_m) + "; forward Euler would be unstable");
}

}  // namespace

std::vector<std::uint8_t> lif_step(CoreState& state, const LifParams& params,
                                   const std::vector<double>& input_current) {
    check_lif_params(params);
    if (input_current.size() != state.u.size())
        throw SpecError("lif: current vector length " + std::to_string(input_current.size()) +
                        ", state holds " + std::to_string(state.u.size()));
    std::vector<std::uint8_t> spikes(state.u.size(), 0);
    const double k = params.dt / params.tau_m;
    for (std::size_t n = 0; n < state.u.size(); ++n) {
        double u = state.u[n];
        u += k * (-(u - params.u_rest) + params.resistance * input_current[n]);
        if (u >= params.u_threshold) {
            spikes[n] = 1;
            u = params.u_reset;
        }
        state.u[n] = u;
    }
    return spikes;
}

SnnResult run_snn(const MappingResult& mapping, const LifParams& params,
                  const std::vector<double>& input_rates, int timesteps, std::uint64_t seed) {
    check_lif_params(params);
    if (timesteps < 1) throw SpecError("timesteps must be >= 1");
    const NetworkSpec& spec = mapping.spec;
    if (input_rates.size() != static_cast<std::size_t>(spec.input.count()))
        throw SpecError("input rates: expected " + std::to_string(spec.input.count()) +
                        " values, got " + std::to_string(input_rates.size()));
    for (double r : input_rates)
        if (!(r >= 0.0 && r <= 1.0))
            throw SpecError("input rates must lie in [0,1]");
    validate_structure(mapping);

    const int n_layers = spec.layer_count();
    std::vector<CoreState> states(mapping.cores.size());
    for (std::size_t i = 0; i < mapping.cores.size(); ++i)
        states[i].u.assign(static_cast<std::size_t>(mapping.cores[i].neuron_count()),
                           params.u_rest);

    SnnResult result;
    result.output_layer = n_layers;
    result.output_shape = spec.shape_of(n_layers);
    result.spike_counts.assign(static_cast<std::size_t>(result.output_shape.count()), 0);

    // One uniform draw per input neuron per timestep, fixed order; everything
    // downstream is deterministic, so runs with equal seeds match exactly.
    std::mt19937_64 rng(seed);
    auto draw = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    std::vector<float> prev_spikes(static_cast<std::size_t>(spec.input.count()));
    std::vector<float> cur_spikes;
    for (int t = 0; t < timesteps; ++t) {
        prev_spikes.assign(static_cast<std::size_t>(spec.input.count()), 0.0f);
        for (std::size_t i = 0; i < prev_spikes.size(); ++i)
            prev_spikes[i] = draw() < input_rates[i] ? 1.0f : 0.0f;
        if (n_layers == 0) {
            for (std::size_t i = 0; i < prev_spikes.size(); ++i)
                result.spike_counts[i] += prev_spikes[i] > 0.0f ? 1 : 0;
            continue;
        }
        for (int l = 1; l <= n_layers; ++l) {
            const TensorShape& shape = spec.shape_of(l);
            const TensorShape& prev_shape = spec.shape_of(l - 1);
            cur_spikes.assign(static_cast<std::size_t>(shape.count()), 0.0f);
            const int begin = mapping.layer_core_offsets[static_cast<std::size_t>(l) - 1];
            const int end = mapping.layer_core_offsets[static_cast<std::size_t>(l)];
#pragma omp parallel for schedule(dynamic)
            for (int ci = begin; ci < end; ++ci) {
                const CoreAllocation& core = mapping.cores[static_cast<std::size_t>(ci)];
                std::vector<float> x(static_cast<std::size_t>(core.axon_count()));
                for (int a = 0; a < core.axon_count(); ++a)
                    x[static_cast<std::size_t>(a)] = prev_spikes[static_cast<std::size_t>(
                        neuron_index(core.axon_slots[static_cast<std::size_t>(a)], prev_shape))];
                const std::vector<float> y = core_mvm(core, x);
                std::vector<double> current(y.begin(), y.end());
                const std::vector<std::uint8_t> spikes =
                    lif_step(states[static_cast<std::size_t>(ci)], params, current);
                for (int n = 0; n < core.neuron_count(); ++n)
                    cur_spikes[static_cast<std::size_t>(neuron_index(
                        core.neuron_slots[static_cast<std::size_t>(n)], shape))] =
                        spikes[static_cast<std::size_t>(n)] ? 1.0f : 0.0f;
            }
            std::swap(prev_spikes, cur_spikes);
        }
        for (std::size_t i = 0; i < prev_spikes.size(); ++i)
            result.spike_counts[i] += prev_spikes[i] > 0.0f ? 1 : 0;
    }
    return result;
}

namespace {

std::vector<double> read_number_file(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw IoError(what + ": cannot open '" + path + "'");
    std::vector<double> values;
    std::string token;
    // Commas and whitespace both separate values.
    while (in >> token) {
        std::size_t start = 0;
        while (start <= token.size()) {
            const std::size_t comma = token.find(',', start);
            const std::string_view piece(token.data() + start,
                                         (comma == std::string::npos ? token.size() : comma) -
                                             start);
            if (!piece.empty()) {
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
                if (ec != std::errc() || ptr != piece.data() + piece.size())
                    throw IoError(what + ": bad number '" + std::string(piece) + "' in '" + path +
                                  "'");
                values.push_back(v);
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return values;
}

}  // namespace

Tensor read_tensor_csv(const std::string& path, const TensorShape& shape) {
    const std::vector<double> values = read_number_file(path, "input tensor");
    if (values.size() != static_cast<std::size_t>(shape.count()))
        throw IoError("input tensor '" + path + "': expected " + std::to_string(shape.count()) +
                      " values, got " + std::to_string(values.size()));
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < values.size(); ++i) t.v[i] = static_cast<float>(values[i]);
    return t;
}

std::vector<double> read_rates_csv(const std::string& path, const TensorShape& shape) {
    const std::vector<double> values = read_number_file(path, "input rates");
    if (values.size() != static_cast<std::size_t>(shape.count()))
        throw IoError("input rates '" + path + "': expected " + std::to_string(shape.count()) +
                      " values, got " + std::to_string(values.size()));
    return values;
}

void write_spike_csv(std::ostream& os, const SnnResult& result) {
    os << "neuron,count\n";
    for (std::size_t i = 0; i < result.spike_counts.size(); ++i)
        os << to_string(neuron_at(result.output_layer, static_cast<int>(i), result.output_shape))
           << ',' << result.spike_counts[i] << '\n';
}

}  // namespace xbar
