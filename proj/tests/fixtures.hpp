#pragma once

// Shared test fixtures: canonical network descriptions, deterministic weight
// and input generators, a scratch-directory guard, and the bounded random
// network family used by the equivalence sweeps.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "xbar/ir.hpp"
#include "xbar/simcore.hpp"

namespace xbar::test {

class NetBuilder {
public:
    NetBuilder(int h, int w, int c) {
        spec_.input = {h, w, c};
        cur_ = spec_.input;
    }
    NetBuilder& conv(int k, int stride, int pad, int out_ch) {
        LayerSpec ls;
        ls.index = static_cast<int>(spec_.layers.size()) + 1;
        ls.kind = LayerKind::Conv;
        ls.filter_h = ls.filter_w = k;
        ls.stride_h = ls.stride_w = stride;
        ls.pad = {pad, pad, pad, pad};
        ls.out_channels = out_ch;
        ls.in_shape = cur_;
        ls.out_shape = conv_output_shape(cur_, ls);
        cur_ = ls.out_shape;
        spec_.layers.push_back(ls);
        return *this;
    }
    NetBuilder& fc(int out) {
        LayerSpec ls;
        ls.index = static_cast<int>(spec_.layers.size()) + 1;
        ls.kind = LayerKind::Fc;
        ls.out_channels = out;
        ls.in_shape = cur_;
        ls.out_shape = {1, 1, out};
        cur_ = ls.out_shape;
        spec_.layers.push_back(ls);
        return *this;
    }
    NetworkSpec spec() const { return spec_; }

private:
    NetworkSpec spec_;
    TensorShape cur_;
};

// 28x28x1 -> 28x28x8 -> 14x14x16 -> 6x6x64
inline NetworkSpec mnist_spec() {
    return NetBuilder(28, 28, 1).conv(3, 1, 1, 8).conv(3, 2, 1, 16).conv(3, 2, 0, 64).spec();
}

// 32x32x3 -> 30x30x8 -> 14x14x16 -> 6x6x64
inline NetworkSpec cifar_spec() {
    return NetBuilder(32, 32, 3).conv(3, 1, 0, 8).conv(3, 2, 0, 16).conv(3, 2, 0, 64).spec();
}

inline double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Signed weights, magnitude in [0.3, 1] / sqrt(fan_in).
inline WeightStore random_weights(const NetworkSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    WeightStore zeros = zero_weights(spec);
    std::vector<LayerWeights> layers;
    for (int l = 1; l <= spec.layer_count(); ++l) {
        const LayerSpec& ls = spec.layers[static_cast<std::size_t>(l) - 1];
        const long long fan = ls.kind == LayerKind::Conv
                                  ? static_cast<long long>(ls.filter_h) * ls.filter_w *
                                        ls.in_shape.channels
                                  : ls.in_shape.count();
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
        LayerWeights lw = zeros.layer(l);
        for (float& v : lw.values) {
            const double mag = (0.3 + 0.7 * unit_draw(rng)) * bound;
            v = static_cast<float>(unit_draw(rng) < 0.5 ? -mag : mag);
        }
        layers.push_back(std::move(lw));
    }
    return WeightStore{std::move(layers)};
}

// Positive weights, magnitude in [0.5, 1] / sqrt(fan_in). With inputs in
// [0.5, 1.5] every activation stays strictly positive and O(1), so any
// single-cell tamper moves some output well past any reasonable tolerance.
inline WeightStore positive_weights(const NetworkSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    WeightStore zeros = zero_weights(spec);
    std::vector<LayerWeights> layers;
    for (int l = 1; l <= spec.layer_count(); ++l) {
        const LayerSpec& ls = spec.layers[static_cast<std::size_t>(l) - 1];
        const long long fan = ls.kind == LayerKind::Conv
                                  ? static_cast<long long>(ls.filter_h) * ls.filter_w *
                                        ls.in_shape.channels
                                  : ls.in_shape.count();
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
        LayerWeights lw = zeros.layer(l);
        for (float& v : lw.values)
            v = static_cast<float>((0.5 + 0.5 * unit_draw(rng)) * bound);
        layers.push_back(std::move(lw));
    }
    return WeightStore{std::move(layers)};
}

inline Tensor random_input(const NetworkSpec& spec, std::uint64_t seed, double lo = 0.0,
                           double hi = 1.0) {
    std::mt19937_64 rng(seed);
    Tensor t = Tensor::zeros(spec.input);
    for (float& v : t.v) v = static_cast<float>(lo + (hi - lo) * unit_draw(rng));
    return t;
}

// Conv/fc networks bounded so every layer maps onto a 256x256 core:
// <= 3 layers, spatial dims <= 12, channels <= 8, K in {1,3,5}, S in {1,2},
// pad in {0,1}, with an optional trailing fc layer.
inline NetworkSpec random_net(std::mt19937_64& rng) {
    const auto pick = [&rng](std::initializer_list<int> opts) {
        auto it = opts.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(unit_draw(rng) * opts.size()));
        return *it;
    };
    while (true) {
        const int h = 3 + static_cast<int>(unit_draw(rng) * 10);  // 3..12
        const int w = 3 + static_cast<int>(unit_draw(rng) * 10);
        const int c = pick({1, 2, 3, 4});
        NetBuilder b(h, w, c);
        const int n_layers = 1 + static_cast<int>(unit_draw(rng) * 3);  // 1..3
        bool ok = true;
        TensorShape cur{h, w, c};
        for (int l = 0; l < n_layers && ok; ++l) {
            const bool last = l == n_layers - 1;
            if (last && unit_draw(rng) < 0.3) {
                if (cur.count() > 256) {
                    ok = false;
                    break;
                }
                b.fc(pick({1, 2, 4, 8}));
                break;
            }
            const int k = pick({1, 3, 5});
            const int s = pick({1, 2});
            const int pad = pick({0, 1});
            const int oc = pick({1, 2, 3, 4, 6, 8});
            if (k > cur.height + 2 * pad || k > cur.width + 2 * pad ||
                k * k * cur.channels > 256) {
                ok = false;
                break;
            }
            b.conv(k, s, pad, oc);
            cur = b.spec().layers.back().out_shape;
        }
        if (ok) return b.spec();
    }
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("xbar-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace xbar::test
