#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "xbar/ir.hpp"

using namespace xbar;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

LayerSpec conv_layer(int index, int k, int s, PadSpec pad, int oc) {
    LayerSpec ls;
    ls.index = index;
    ls.kind = LayerKind::Conv;
    ls.filter_h = ls.filter_w = k;
    ls.stride_h = ls.stride_w = s;
    ls.pad = pad;
    ls.out_channels = oc;
    return ls;
}

}  // namespace

TEST_CASE("conv output shapes: frozen cases") {
    // 28x28, K3 S1 pad1 keeps the extent.
    CHECK(conv_output_shape({28, 28, 1}, conv_layer(1, 3, 1, {1, 1, 1, 1}, 8)) ==
          TensorShape{28, 28, 8});
    // 32x32, K3 S1 no pad shrinks by K-1.
    CHECK(conv_output_shape({32, 32, 3}, conv_layer(1, 3, 1, {0, 0, 0, 0}, 8)) ==
          TensorShape{30, 30, 8});
    // Floor division: (30 - 3)/2 + 1 = 14, not 15.
    CHECK(conv_output_shape({30, 30, 8}, conv_layer(2, 3, 2, {0, 0, 0, 0}, 16)) ==
          TensorShape{14, 14, 16});
    CHECK(conv_output_shape({14, 14, 16}, conv_layer(3, 3, 2, {0, 0, 0, 0}, 64)) ==
          TensorShape{6, 6, 64});
    // 28x28 with pad 1 at stride 2: (30 - 3)/2 + 1 = 14.
    CHECK(conv_output_shape({28, 28, 8}, conv_layer(2, 3, 2, {1, 1, 1, 1}, 16)) ==
          TensorShape{14, 14, 16});
    // Asymmetric padding counts per side.
    CHECK(conv_output_shape({5, 5, 1}, conv_layer(1, 3, 2, {1, 0, 0, 0}, 1)) ==
          TensorShape{2, 2, 1});
}

TEST_CASE("conv output shapes: rejections name the layer") {
    CHECK_THROWS_WITH_AS(conv_output_shape({8, 8, 1}, conv_layer(2, 3, 0, {0, 0, 0, 0}, 1)),
                         "layer 2: stride must be >= 1", SpecError);
    CHECK_THROWS_WITH_AS(conv_output_shape({3, 3, 1}, conv_layer(1, 5, 1, {0, 0, 0, 0}, 1)),
                         "layer 1: filter 5x5 larger than padded input 3x3", SpecError);
    CHECK_THROWS_AS(conv_output_shape({4, 4, 1}, conv_layer(1, 3, 1, {-1, 0, 0, 0}, 1)),
                    SpecError);
    CHECK_THROWS_AS(conv_output_shape({4, 4, 1}, conv_layer(1, 3, 1, {0, 0, 0, 0}, 0)), SpecError);
}

TEST_CASE("neuron ids: canonical string and strict parse") {
    const NeuronId id{2, 3, 4, 5, false};
    CHECK(to_string(id) == "L2-F3-N[4,5]");
    CHECK(parse_neuron_id("L2-F3-N[4,5]") == id);
    CHECK(parse_neuron_id("L0-F1-N[1,1]") == NeuronId{0, 1, 1, 1, false});

    for (const char* bad : {"", "L2-F3-N[4,5", "L2-F3-N[4,5]x", "l2-F3-N[4,5]", "L2-F3-N[4 5]",
                            "L2-F3-N(4,5)", "L2F3-N[4,5]", "L2-F3-N[4,5] ", "L-2-F3-N[4,5]",
                            "L2-F0-N[4,5]", "L2-F3-N[0,5]"})
        CHECK_THROWS_AS(parse_neuron_id(bad), SpecError);
}

TEST_CASE("neuron ids: unique across a network and index round-trip") {
    const NetworkSpec spec = test::NetBuilder(5, 7, 3).conv(3, 2, 1, 4).fc(6).spec();
    std::set<std::string> seen;
    for (int l = 0; l <= spec.layer_count(); ++l) {
        const TensorShape& shape = spec.shape_of(l);
        for (int i = 0; i < shape.count(); ++i) {
            const NeuronId id = neuron_at(l, i, shape);
            CHECK(neuron_index(id, shape) == i);
            const std::string s = to_string(id);
            CHECK(parse_neuron_id(s) == id);
            CHECK(seen.insert(s).second);
        }
    }
    // L0 feature means input channel; the first two linear slots differ in
    // channel, not column.
    CHECK(to_string(neuron_at(0, 0, spec.input)) == "L0-F1-N[1,1]");
    CHECK(to_string(neuron_at(0, 1, spec.input)) == "L0-F2-N[1,1]");
    CHECK(to_string(neuron_at(0, 3, spec.input)) == "L0-F1-N[1,2]");
}

TEST_CASE("neuron_index rejects out-of-shape and virtual ids") {
    const TensorShape shape{4, 4, 2};
    CHECK_THROWS_AS(neuron_index(NeuronId{1, 1, 5, 1, false}, shape), SpecError);
    CHECK_THROWS_AS(neuron_index(NeuronId{1, 3, 1, 1, false}, shape), SpecError);
    CHECK_THROWS_AS(neuron_index(NeuronId{1, 1, 0, 1, true}, shape), SpecError);
}

TEST_CASE("parse_network resolves the shape chain") {
    const NetworkSpec spec = parse_network(slurp(std::string(XBAR_DATA_DIR) + "/mnist.json"));
    CHECK(spec == test::mnist_spec());
    CHECK(spec.layers[0].out_shape == TensorShape{28, 28, 8});
    CHECK(spec.layers[1].out_shape == TensorShape{14, 14, 16});
    CHECK(spec.layers[2].out_shape == TensorShape{6, 6, 64});

    const NetworkSpec cifar = parse_network(slurp(std::string(XBAR_DATA_DIR) + "/cifar10.json"));
    CHECK(cifar == test::cifar_spec());
    CHECK(cifar.layers[0].out_shape == TensorShape{30, 30, 8});
}

TEST_CASE("parse_network round-trips through serialize_network") {
    const NetworkSpec spec = test::NetBuilder(9, 11, 2).conv(3, 1, 1, 4).conv(1, 2, 0, 2).fc(5).spec();
    CHECK(parse_network(serialize_network(spec)) == spec);
}

TEST_CASE("parse_network rejections name layer and field") {
    const char* ok = R"({"input":{"h":4,"w":4,"c":1},"layers":[
        {"kind":"conv","k":[3,3],"stride":[1,1],"pad":[0,0,0,0],"out_channels":2}]})";
    CHECK_NOTHROW(parse_network(ok));

    CHECK_THROWS_WITH_AS(parse_network("{"), doctest::Contains("not valid JSON"), SpecError);
    CHECK_THROWS_WITH_AS(parse_network(R"({"layers":[]})"),
                         "network manifest: missing field 'input'", SpecError);
    CHECK_THROWS_WITH_AS(parse_network(R"({"input":{"h":4,"w":4,"c":0},"layers":[]})"),
                         "input: dimensions must be >= 1", SpecError);
    CHECK_THROWS_WITH_AS(
        parse_network(
            R"({"input":{"h":4,"w":4,"c":1},"layers":[{"kind":"pool","out":3}]})"),
        "layer 1: unknown kind 'pool'", SpecError);
    CHECK_THROWS_WITH_AS(
        parse_network(
            R"({"input":{"h":4,"w":4,"c":1},"layers":[{"kind":"conv","k":[3,3],"stride":[1,1],"out_channels":2}]})"),
        "layer 1: missing field 'pad'", SpecError);
    CHECK_THROWS_WITH_AS(
        parse_network(
            R"({"input":{"h":4,"w":4,"c":1},"layers":[{"kind":"fc","out":3,"k":[1,1]}]})"),
        "layer 1: unknown field 'k'", SpecError);
    CHECK_THROWS_WITH_AS(
        parse_network(
            R"({"input":{"h":4,"w":4,"c":1},"layers":[{"kind":"conv","k":[3],"stride":[1,1],"pad":[0,0,0,0],"out_channels":2}]})"),
        "layer 1: field 'k' must be an array of 2 integers", SpecError);
    // Shape-chain violation is rejected, not corrected.
    CHECK_THROWS_WITH_AS(
        parse_network(
            R"({"input":{"h":3,"w":3,"c":1},"layers":[
                {"kind":"conv","k":[3,3],"stride":[2,2],"pad":[0,0,0,0],"out_channels":2},
                {"kind":"conv","k":[3,3],"stride":[1,1],"pad":[0,0,0,0],"out_channels":2}]})"),
        "layer 2: filter 3x3 larger than padded input 1x1", SpecError);
}

TEST_CASE("weight manifest layout is pinned") {
    const std::string manifest = weight_manifest_json(test::mnist_spec());
    // 8*1*3*3 floats, then 16*8*3*3, then 64*16*3*3.
    CHECK(manifest.find("\"length_bytes\": 288") != std::string::npos);
    CHECK(manifest.find("\"length_bytes\": 4608") != std::string::npos);
    CHECK(manifest.find("\"length_bytes\": 36864") != std::string::npos);
    CHECK(manifest.find("\"offset_bytes\": 4896") != std::string::npos);
}

TEST_CASE("load_weights decodes little-endian float32 in declared order") {
    const NetworkSpec spec = test::NetBuilder(2, 2, 1).conv(1, 1, 0, 2).spec();
    // Layer 1 shape [2,1,1,1]: two floats, 0.5 then -1.25.
    const std::vector<std::uint8_t> blob = {0x00, 0x00, 0x00, 0x3f, 0x00, 0x00, 0xa0, 0xbf};
    const WeightStore w = load_weights(spec, blob, weight_manifest_json(spec));
    CHECK(w.conv(1, 0, 0, 0, 0) == 0.5f);
    CHECK(w.conv(1, 1, 0, 0, 0) == -1.25f);
}

TEST_CASE("load_weights rejects size and manifest mismatches") {
    const NetworkSpec spec = test::NetBuilder(4, 4, 1).conv(3, 1, 0, 2).spec();
    const std::string manifest = weight_manifest_json(spec);
    const std::vector<std::uint8_t> good(2 * 1 * 3 * 3 * 4, 0);

    CHECK_NOTHROW(load_weights(spec, good, manifest));
    std::vector<std::uint8_t> truncated(good.begin(), good.end() - 4);
    CHECK_THROWS_WITH_AS(load_weights(spec, truncated, manifest),
                         "weight blob size mismatch: expected 72 bytes, got 68", SpecError);

    std::string wrong_shape = manifest;
    const auto pos = wrong_shape.find("3,");
    wrong_shape.replace(pos, 2, "4,");
    CHECK_THROWS_AS(load_weights(spec, good, wrong_shape), SpecError);

    std::string wrong_offset = manifest;
    const auto opos = wrong_offset.find("\"offset_bytes\": 0");
    wrong_offset.replace(opos, 17, "\"offset_bytes\": 4");
    CHECK_THROWS_AS(load_weights(spec, good, wrong_offset), SpecError);
}

TEST_CASE("weights round-trip through blob and manifest") {
    const NetworkSpec spec = test::NetBuilder(6, 6, 2).conv(3, 1, 1, 3).fc(4).spec();
    const WeightStore w = test::random_weights(spec, 42);
    const WeightStore back = load_weights(spec, serialize_weights(spec, w),
                                          weight_manifest_json(spec));
    for (int l = 1; l <= spec.layer_count(); ++l) {
        CHECK(back.layer(l).shape == w.layer(l).shape);
        CHECK(back.layer(l).values == w.layer(l).values);
    }
}
