#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "xbar/connectivity.hpp"

using namespace xbar;

TEST_CASE("single 3x3 window: nine taps in kernel-row-major order") {
    const NetworkSpec spec = test::NetBuilder(3, 3, 1).conv(3, 1, 0, 1).spec();
    const WeightStore w = test::random_weights(spec, 3);
    const ConnectivityList conn = build_connectivity(spec, w, 1);

    REQUIRE(conn.synapses.size() == 9);
    CHECK(conn.fan_in == std::vector<int>{9});
    int k = 0;
    for (int kr = 0; kr < 3; ++kr)
        for (int kc = 0; kc < 3; ++kc) {
            const Synapse& s = conn.synapses[static_cast<std::size_t>(k++)];
            CHECK(s.dst == NeuronId{1, 1, 1, 1, false});
            CHECK(s.src == NeuronId{0, 1, kr + 1, kc + 1, false});
            CHECK(s.tap == Tap{kr, kc, 0});
            CHECK(s.weight == w.conv(1, 0, 0, kr, kc));
        }
}

TEST_CASE("destination enumeration: row-major spatial outer, feature inner") {
    const NetworkSpec spec = test::NetBuilder(3, 3, 1).conv(2, 1, 0, 2).spec();
    const WeightStore w = test::random_weights(spec, 4);
    const ConnectivityList conn = build_connectivity(spec, w, 1);

    // Out 2x2x2, fan-in 4 each: dst sequence follows the linear index.
    std::vector<NeuronId> dst_order;
    for (std::size_t i = 0; i < conn.synapses.size(); i += 4)
        dst_order.push_back(conn.synapses[i].dst);
    const std::vector<NeuronId> want = {
        {1, 1, 1, 1, false}, {1, 2, 1, 1, false}, {1, 1, 1, 2, false}, {1, 2, 1, 2, false},
        {1, 1, 2, 1, false}, {1, 2, 2, 1, false}, {1, 1, 2, 2, false}, {1, 2, 2, 2, false}};
    CHECK(dst_order == want);
    // Multi-channel taps: kernel position outer, input channel inner.
    const NetworkSpec spec2 = test::NetBuilder(2, 2, 3).conv(2, 1, 0, 1).spec();
    const ConnectivityList conn2 =
        build_connectivity(spec2, test::random_weights(spec2, 5), 1);
    REQUIRE(conn2.synapses.size() == 12);
    CHECK(conn2.synapses[0].tap == Tap{0, 0, 0});
    CHECK(conn2.synapses[1].tap == Tap{0, 0, 1});
    CHECK(conn2.synapses[2].tap == Tap{0, 0, 2});
    CHECK(conn2.synapses[3].tap == Tap{0, 1, 0});
}

TEST_CASE("virtual padding: enumerate then prune, border fan-in reduced") {
    const NetworkSpec spec = test::mnist_spec();
    const WeightStore w = test::random_weights(spec, 6);

    const std::vector<Synapse> raw = enumerate_padded_taps(spec, w, 1);
    CHECK(raw.size() == 28u * 28 * 8 * 9);  // every tap present, padding included
    std::size_t virtual_taps = 0;
    for (const Synapse& s : raw)
        if (s.src.virtual_pad) ++virtual_taps;
    CHECK(virtual_taps == 2656);  // 332 padded taps per (in,out) channel pair, 8 out channels

    const ConnectivityList conn = virtual_pad_then_prune(spec.layers[0], raw);
    CHECK(conn.synapses.size() == 53792);  // 8 * (4*4 + 104*6 + 676*9)
    for (const Synapse& s : conn.synapses) {
        CHECK(!s.src.virtual_pad);
        CHECK(s.src.row >= 1);
        CHECK(s.src.row <= 28);
        CHECK(s.src.col >= 1);
        CHECK(s.src.col <= 28);
    }
    // Corner, edge, interior fan-in: 4, 6, 9 (single input channel).
    const TensorShape& out = spec.layers[0].out_shape;
    const auto fan = [&](int r, int c) {
        return conn.fan_in[static_cast<std::size_t>(
            neuron_index(NeuronId{1, 1, r, c, false}, out))];
    };
    CHECK(fan(1, 1) == 4);
    CHECK(fan(1, 14) == 6);
    CHECK(fan(14, 1) == 6);
    CHECK(fan(14, 14) == 9);
    CHECK(fan(28, 28) == 4);
}

TEST_CASE("fan-in matches the brute-force oracle on assorted layers") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 12; ++trial) {
        const NetworkSpec spec = test::random_net(rng);
        const WeightStore w = test::random_weights(spec, 1000 + static_cast<std::uint64_t>(trial));
        for (int l = 1; l <= spec.layer_count(); ++l) {
            if (spec.layers[static_cast<std::size_t>(l) - 1].kind != LayerKind::Conv) continue;
            const ConnectivityList conn = build_connectivity(spec, w, l);
            CHECK(conn.fan_in == test::brute_fan_in(spec.layers[static_cast<std::size_t>(l) - 1]));
        }
    }
}

TEST_CASE("no padding means no pruning") {
    const NetworkSpec spec = test::cifar_spec();
    const WeightStore w = test::random_weights(spec, 7);
    const std::vector<Synapse> raw = enumerate_padded_taps(spec, w, 1);
    for (const Synapse& s : raw) CHECK(!s.src.virtual_pad);
    const ConnectivityList conn = build_connectivity(spec, w, 1);
    CHECK(conn.synapses.size() == raw.size());
    for (int f : conn.fan_in) CHECK(f == 27);  // 3x3 kernel, 3 input channels
}

TEST_CASE("fully-connected layers tap every source in linear order") {
    const NetworkSpec spec = test::NetBuilder(2, 2, 2).fc(3).spec();
    const WeightStore w = test::random_weights(spec, 8);
    const ConnectivityList conn = build_connectivity(spec, w, 1);

    REQUIRE(conn.synapses.size() == 24);
    CHECK(conn.fan_in == std::vector<int>{8, 8, 8});
    for (int o = 0; o < 3; ++o)
        for (int i = 0; i < 8; ++i) {
            const Synapse& s = conn.synapses[static_cast<std::size_t>(o * 8 + i)];
            CHECK(s.dst == NeuronId{1, o + 1, 1, 1, false});
            CHECK(s.src == neuron_at(0, i, spec.input));
            CHECK(s.weight == w.fc(1, o, i));
            CHECK(s.tap == Tap{0, 0, 0});
        }
}

TEST_CASE("virtual_pad_then_prune works on a hand-built tap list") {
    LayerSpec ls;
    ls.index = 1;
    ls.kind = LayerKind::Conv;
    ls.out_shape = {1, 2, 1};
    std::vector<Synapse> raw(4);
    raw[0] = {NeuronId{0, 1, 0, 1, true}, NeuronId{1, 1, 1, 1, false}, 0.5f, {0, 0, 0}};
    raw[1] = {NeuronId{0, 1, 1, 1, false}, NeuronId{1, 1, 1, 1, false}, 0.25f, {1, 0, 0}};
    raw[2] = {NeuronId{0, 1, 1, 1, false}, NeuronId{1, 1, 1, 2, false}, -1.0f, {0, 0, 0}};
    raw[3] = {NeuronId{0, 1, 2, 1, false}, NeuronId{1, 1, 1, 2, false}, 2.0f, {1, 0, 0}};

    const ConnectivityList conn = virtual_pad_then_prune(ls, raw);
    CHECK(conn.fan_in == std::vector<int>{1, 2});
    CHECK(conn.dst_offset == std::vector<int>{0, 1, 3});
    REQUIRE(conn.synapses.size() == 3);
    CHECK(conn.synapses[0].weight == 0.25f);
    CHECK(conn.synapses[1].weight == -1.0f);
}

TEST_CASE("debug synapse dump carries tap provenance") {
    const NetworkSpec spec = test::NetBuilder(2, 2, 1).conv(2, 1, 0, 1).spec();
    WeightStore w = zero_weights(spec);
    const ConnectivityList conn = build_connectivity(spec, w, 1);
    std::ostringstream os;
    write_connectivity_csv(conn, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "src,dst,weight,krow,kcol,inch");
    std::getline(is, line);
    CHECK(line == "L0-F1-N[1,1],L1-F1-N[1,1],0,0,0,0");
}
