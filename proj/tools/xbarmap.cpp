// Crossbar compiler CLI: map a network onto cores, verify a mapped network
// against the dense reference, or run a rate-coded spiking simulation.
//
// Exit codes: 0 success, 1 usage, 2 unmappable or invalid configuration,
// 3 I/O failure, 4 verification mismatch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xbar/emitters.hpp"
#include "xbar/simcore.hpp"

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw xbar::IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw xbar::IoError("read failed for '" + path + "'");
    return ss.str();
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw xbar::IoError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw xbar::IoError("read failed for '" + path + "'");
    return bytes;
}

std::string format_dev(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1e", v);
    return buf;
}

struct CommonArgs {
    std::string network;
    std::string weights;
    std::string weights_manifest;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--network", args.network, "network manifest (JSON)")->required();
    cmd->add_option("--weights", args.weights, "weight blob (raw float32 LE)")->required();
    cmd->add_option("--weights-manifest", args.weights_manifest, "weight manifest (JSON)")
        ->required();
}

struct Loaded {
    xbar::NetworkSpec spec;
    xbar::WeightStore weights;
};

Loaded load(const CommonArgs& args) {
    Loaded l;
    l.spec = xbar::parse_network(read_text(args.network));
    l.weights = xbar::load_weights(l.spec, read_bytes(args.weights),
                                   read_text(args.weights_manifest));
    return l;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crossbar-core compiler and debugger for feed-forward networks"};
    app.require_subcommand(1);

    CommonArgs map_args, verify_args, sim_args;
    std::vector<int> core_dims{256, 256};
    std::string map_out;
    std::vector<std::string> notes;
    bool dump_synapses = false;

    CLI::App* cmd_map = app.add_subcommand("map", "compile the network onto crossbar cores");
    add_common(cmd_map, map_args);
    cmd_map->add_option("--core", core_dims, "core capacity: <axons> <neurons>")
        ->expected(2)
        ->check(CLI::PositiveNumber);
    cmd_map->add_option("--out", map_out, "artifact output directory")->required();
    cmd_map->add_option("--note", notes, "extra note line for the report (repeatable)");
    cmd_map->add_flag("--dump-synapses", dump_synapses,
                      "also write per-layer synapse tables (synapses_L{n}.csv)");

    std::string verify_dir, verify_input;
    double tolerance = 1e-5;
    xbar::Activation activation = xbar::Activation::Relu;
    const std::map<std::string, xbar::Activation> act_names{
        {"linear", xbar::Activation::Linear}, {"relu", xbar::Activation::Relu}};

    CLI::App* cmd_verify =
        app.add_subcommand("verify", "replay a mapped network against the dense reference");
    add_common(cmd_verify, verify_args);
    cmd_verify->add_option("--out", verify_dir, "artifact directory written by map")->required();
    cmd_verify->add_option("--input", verify_input, "input tensor CSV (row-major, channel-minor)")
        ->required();
    cmd_verify->add_option("--tolerance", tolerance, "max allowed relative deviation")
        ->check(CLI::NonNegativeNumber);
    cmd_verify
        ->add_option("--activation", activation, "neuron transfer for the comparison")
        ->transform(CLI::CheckedTransformer(act_names, CLI::ignore_case));

    std::string sim_out, sim_input;
    std::vector<int> sim_core{256, 256};
    int timesteps = 0;
    std::uint64_t seed = 0;
    xbar::LifParams lif;

    CLI::App* cmd_sim = app.add_subcommand("simulate", "rate-coded spiking run on the mapping");
    add_common(cmd_sim, sim_args);
    cmd_sim->add_option("--core", sim_core, "core capacity: <axons> <neurons>")
        ->expected(2)
        ->check(CLI::PositiveNumber);
    cmd_sim->add_option("--out", sim_out, "output directory for spikes.csv")->required();
    cmd_sim->add_option("--input", sim_input, "input firing rates CSV, values in [0,1]")
        ->required();
    cmd_sim->add_option("--timesteps", timesteps, "simulation steps")
        ->required()
        ->check(CLI::PositiveNumber);
    cmd_sim->add_option("--seed", seed, "RNG seed for the Bernoulli input encoding");
    cmd_sim->add_option("--tau-m", lif.tau_m, "membrane time constant (s)");
    cmd_sim->add_option("--resistance", lif.resistance, "membrane resistance");
    cmd_sim->add_option("--u-rest", lif.u_rest, "resting potential");
    cmd_sim->add_option("--threshold", lif.u_threshold, "spike threshold");
    cmd_sim->add_option("--u-reset", lif.u_reset, "post-spike reset potential");
    cmd_sim->add_option("--dt", lif.dt, "integration step (s), must be <= tau-m");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_map->parsed()) {
            const Loaded l = load(map_args);
            const xbar::CoreSpec core{core_dims[0], core_dims[1]};
            const xbar::MappingResult mapping = xbar::map_network(l.spec, l.weights, core);
            xbar::write_artifacts(mapping, map_out, notes);
            if (dump_synapses) {
                for (int n = 1; n <= l.spec.layer_count(); ++n) {
                    const auto path = std::filesystem::path(map_out) /
                                      ("synapses_L" + std::to_string(n) + ".csv");
                    std::ofstream os(path, std::ios::binary);
                    if (!os) throw xbar::IoError("cannot write '" + path.string() + "'");
                    xbar::write_connectivity_csv(xbar::build_connectivity(l.spec, l.weights, n),
                                                 os);
                }
            }
            for (const xbar::TilePlan& plan : mapping.plans)
                std::cout << "layer " << plan.layer << ": [" << plan.axons_used << ','
                          << plan.neurons_used << "] cores "
                          << mapping.layer_core_count(plan.layer) << '\n';
            std::cout << "total cores: " << mapping.total_cores() << '\n';
        } else if (cmd_verify->parsed()) {
            const Loaded l = load(verify_args);
            const xbar::MappingResult mapping = xbar::load_mapping(verify_dir, l.spec);
            const xbar::Tensor input = xbar::read_tensor_csv(verify_input, l.spec.input);
            const xbar::VerificationReport report =
                xbar::verify(mapping, l.spec, l.weights, input, tolerance, activation);
            for (const xbar::LayerCheck& check : report.layers)
                std::cout << "layer " << check.layer << ": maxdev=" << format_dev(check.max_deviation)
                          << (check.pass ? " PASS" : " FAIL") << '\n';
            if (report.pass) {
                std::cout << "PASS maxdev=" << format_dev(report.max_deviation) << '\n';
            } else {
                std::cout << "FAIL maxdev=" << format_dev(report.max_deviation)
                          << " first=" << xbar::to_string(*report.first_mismatch) << '\n';
                return 4;
            }
        } else if (cmd_sim->parsed()) {
            const Loaded l = load(sim_args);
            const xbar::CoreSpec core{sim_core[0], sim_core[1]};
            const xbar::MappingResult mapping = xbar::map_network(l.spec, l.weights, core);
            const std::vector<double> rates = xbar::read_rates_csv(sim_input, l.spec.input);
            const xbar::SnnResult result = xbar::run_snn(mapping, lif, rates, timesteps, seed);
            std::error_code ec;
            std::filesystem::create_directories(sim_out, ec);
            if (ec) throw xbar::IoError("cannot create '" + sim_out + "': " + ec.message());
            const auto path = std::filesystem::path(sim_out) / "spikes.csv";
            std::ofstream os(path, std::ios::binary);
            if (!os) throw xbar::IoError("cannot write '" + path.string() + "'");
            xbar::write_spike_csv(os, result);
            os.flush();
            if (!os) throw xbar::IoError("write failed for '" + path.string() + "'");
            long long total = 0;
            for (long long c : result.spike_counts) total += c;
            std::cout << "wrote " << path.string() << '\n';
            std::cout << "total spikes: " << total << '\n';
        }
    } catch (const xbar::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const xbar::VerifyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const xbar::SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
