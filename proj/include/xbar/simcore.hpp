#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "xbar/mapper.hpp"

namespace xbar {

// Row-major, channel-minor activation tensor (same layout as neuron_index).
struct Tensor {
    TensorShape shape;
    std::vector<float> v;

    static Tensor zeros(const TensorShape& s) {
        return Tensor{s, std::vector<float>(static_cast<std::size_t>(s.count()), 0.0f)};
    }
    float& at(int row, int col, int channel) {
        return v[static_cast<std::size_t>(((row - 1) * shape.width + (col - 1)) * shape.channels +
                                          (channel - 1))];
    }
    float at(int row, int col, int channel) const {
        return v[static_cast<std::size_t>(((row - 1) * shape.width + (col - 1)) * shape.channels +
                                          (channel - 1))];
    }
};

enum class Activation { Linear, Relu };

// One crossbar matrix-vector product: out[n] = sum_a weights[a][n] * input[a].
std::vector<float> core_mvm(const CoreAllocation& core, const std::vector<float>& axon_input);

// Run the mapped network layer by layer, gathering each core's axon inputs
// from the previous layer's tensor and scattering neuron outputs. Returns one
// tensor per layer (index 0 == layer 1). Missing or duplicate producers for a
// destination neuron throw Error naming the neuron.
std::vector<Tensor> run_mapped_inference(const MappingResult& mapping, const Tensor& input,
                                         Activation act);
std::vector<Tensor> run_mapped_inference_serial(const MappingResult& mapping, const Tensor& input,
                                                Activation act);

// Dense oracle over the original network description.
std::vector<Tensor> dense_reference(const NetworkSpec& spec, const WeightStore& weights,
                                    const Tensor& input, Activation act);
std::vector<Tensor> dense_reference_serial(const NetworkSpec& spec, const WeightStore& weights,
                                           const Tensor& input, Activation act);

struct LayerCheck {
    int layer = 0;
    double max_deviation = 0.0;
    bool pass = true;
    std::optional<NeuronId> first_mismatch;
};

struct VerificationReport {
    bool pass = true;
    double max_deviation = 0.0;
    double tolerance = 0.0;
    std::optional<NeuronId> first_mismatch;
    std::vector<LayerCheck> layers;
};

// Element deviation |a-b| / max(1, |a|, |b|); a layer passes when its max
// deviation is <= tolerance.
double deviation(float a, float b);

// Mapped inference vs dense reference on one input.
VerificationReport verify(const MappingResult& mapping, const NetworkSpec& spec,
                          const WeightStore& weights, const Tensor& input, double tolerance,
                          Activation act);

// Leaky integrate-and-fire parameters (SI units). dt must be <= tau_m.
struct LifParams {
    double tau_m = 20e-3;
    double resistance = 1.0;
    double u_rest = 0.0;
    double u_threshold = 1.0;
    double u_reset = 0.0;
    double dt = 1e-3;
};

// Membrane potentials of one core's neurons.
struct CoreState {
    std::vector<double> u;
};

// One forward-Euler step: u += (dt/tau_m) * (-(u - u_rest) + R*I); neurons at
// or above threshold after the update spike and reset to u_reset.
std::vector<std::uint8_t> lif_step(CoreState& state, const LifParams& params,
                                   const std::vector<double>& input_current);

struct SnnResult {
    int output_layer = 0;
    TensorShape output_shape;
    // Spike totals per output neuron, layer linear-index order.
    std::vector<long long> spike_counts;
};

// Rate-coded SNN run: inputs spike Bernoulli(rate) per timestep, spikes
// propagate through the mapped cores, LIF dynamics per neuron. Deterministic
// for a given seed.
SnnResult run_snn(const MappingResult& mapping, const LifParams& params,
                  const std::vector<double>& input_rates, int timesteps, std::uint64_t seed);

// I/O helpers shared by the CLI and tests.
Tensor read_tensor_csv(const std::string& path, const TensorShape& shape);
std::vector<double> read_rates_csv(const std::string& path, const TensorShape& shape);
void write_spike_csv(std::ostream& os, const SnnResult& result);

}  // namespace xbar
