// Generates a deterministic weight blob + manifest (and optionally an input
// tensor) for a network description. Weights are uniform in [-b, b] with
// b = 1/sqrt(fan_in) per layer, which keeps activations O(1) at any depth.

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "text_util.hpp"
#include "xbar/ir.hpp"

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw xbar::IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw xbar::IoError("cannot write '" + path + "'");
    os << content;
    os.flush();
    if (!os) throw xbar::IoError("write failed for '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic weight/input fixture generator"};
    std::string network, out_blob, out_manifest, out_input;
    std::uint64_t seed = 1;
    app.add_option("--network", network, "network manifest (JSON)")->required();
    app.add_option("--out-blob", out_blob, "weight blob path")->required();
    app.add_option("--out-manifest", out_manifest, "weight manifest path")->required();
    app.add_option("--out-input", out_input, "also write a random input tensor CSV");
    app.add_option("--seed", seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const xbar::NetworkSpec spec = xbar::parse_network(read_text(network));
        std::mt19937_64 rng(seed);
        auto uniform = [&rng](double lo, double hi) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            return lo + (hi - lo) * u;
        };

        std::vector<xbar::LayerWeights> layers;
        for (const xbar::LayerSpec& ls : spec.layers) {
            xbar::LayerWeights lw;
            long long fan_in = 0;
            if (ls.kind == xbar::LayerKind::Conv) {
                lw.shape = {ls.out_channels, ls.in_shape.channels, ls.filter_h, ls.filter_w};
                fan_in = static_cast<long long>(ls.filter_h) * ls.filter_w * ls.in_shape.channels;
            } else {
                lw.shape = {ls.out_channels, ls.in_shape.count()};
                fan_in = ls.in_shape.count();
            }
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            lw.values.resize(static_cast<std::size_t>(lw.count()));
            for (float& v : lw.values) v = static_cast<float>(uniform(-bound, bound));
            layers.push_back(std::move(lw));
        }
        const xbar::WeightStore store{std::move(layers)};

        const std::vector<std::uint8_t> blob = xbar::serialize_weights(spec, store);
        std::ofstream os(out_blob, std::ios::binary);
        if (!os) throw xbar::IoError("cannot write '" + out_blob + "'");
        os.write(reinterpret_cast<const char*>(blob.data()),
                 static_cast<std::streamsize>(blob.size()));
        os.flush();
        if (!os) throw xbar::IoError("write failed for '" + out_blob + "'");

        write_file(out_manifest, xbar::weight_manifest_json(spec));

        if (!out_input.empty()) {
            std::string csv;
            for (int i = 0; i < spec.input.count(); ++i) {
                csv += xbar::format_float(static_cast<float>(uniform(0.0, 1.0)));
                csv += '\n';
            }
            write_file(out_input, csv);
        }
        std::cout << "wrote " << out_blob << " (" << blob.size() << " bytes)\n";
    } catch (const xbar::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
