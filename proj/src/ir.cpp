#include "xbar/ir.hpp"

#include <bit>
#include <charconv>
#include <cstring>

#include "json.hpp"

namespace xbar {

using nlohmann::json;

const TensorShape& NetworkSpec::shape_of(int layer) const {
    if (layer == 0) return input;
    if (layer < 0 || layer > layer_count())
        throw SpecError("layer " + std::to_string(layer) + " out of range");
    return layers[static_cast<std::size_t>(layer) - 1].out_shape;
}

std::string to_string(const NeuronId& id) {
    std::string s;
    s.reserve(24);
    s += 'L';
    s += std::to_string(id.layer);
    s += "-F";
    s += std::to_string(id.feature);
    s += "-N[";
    s += std::to_string(id.row);
    s += ',';
    s += std::to_string(id.col);
    s += ']';
    return s;
}

namespace {

// Parses a decimal integer at text[pos], advancing pos. No sign, no leading
// whitespace; ids never contain negative fields.
int parse_int_at(const std::string& text, std::size_t& pos) {
    int value = 0;
    const char* begin = text.data() + pos;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin)
        throw SpecError("bad neuron id '" + text + "'");
    pos += static_cast<std::size_t>(ptr - begin);
    return value;
}

void expect_at(const std::string& text, std::size_t& pos, const char* lit) {
    const std::size_t n = std::strlen(lit);
    if (text.compare(pos, n, lit) != 0)
        throw SpecError("bad neuron id '" + text + "'");
    pos += n;
}

}  // namespace

NeuronId parse_neuron_id(const std::string& text) {
    NeuronId id;
    std::size_t pos = 0;
    expect_at(text, pos, "L");
    id.layer = parse_int_at(text, pos);
    expect_at(text, pos, "-F");
    id.feature = parse_int_at(text, pos);
    expect_at(text, pos, "-N[");
    id.row = parse_int_at(text, pos);
    expect_at(text, pos, ",");
    id.col = parse_int_at(text, pos);
    expect_at(text, pos, "]");
    if (pos != text.size())
        throw SpecError("bad neuron id '" + text + "'");
    if (id.layer < 0 || id.feature < 1 || id.row < 1 || id.col < 1)
        throw SpecError("bad neuron id '" + text + "'");
    return id;
}

int neuron_index(const NeuronId& id, const TensorShape& shape) {
    if (id.virtual_pad)
        throw SpecError("virtual id " + to_string(id) + " has no linear index");
    if (id.row < 1 || id.row > shape.height || id.col < 1 || id.col > shape.width ||
        id.feature < 1 || id.feature > shape.channels)
        throw SpecError("neuron " + to_string(id) + " outside shape " +
                        std::to_string(shape.height) + "x" + std::to_string(shape.width) + "x" +
                        std::to_string(shape.channels));
    return ((id.row - 1) * shape.width + (id.col - 1)) * shape.channels + (id.feature - 1);
}

NeuronId neuron_at(int layer, int linear, const TensorShape& shape) {
    if (linear < 0 || linear >= shape.count())
        throw SpecError("linear index " + std::to_string(linear) + " outside shape of layer " +
                        std::to_string(layer));
    NeuronId id;
    id.layer = layer;
    id.feature = linear % shape.channels + 1;
    const int spatial = linear / shape.channels;
    id.col = spatial % shape.width + 1;
    id.row = spatial / shape.width + 1;
    return id;
}

std::int64_t neuron_key(const NeuronId& id) {
    // 16 bits per field is ample for any mappable network.
    return (static_cast<std::int64_t>(id.layer) << 48) |
           (static_cast<std::int64_t>(id.feature) << 32) |
           (static_cast<std::int64_t>(id.row) << 16) | static_cast<std::int64_t>(id.col);
}

TensorShape conv_output_shape(const TensorShape& input, const LayerSpec& layer) {
    const std::string prefix = "layer " + std::to_string(layer.index);
    if (layer.kind != LayerKind::Conv)
        throw SpecError(prefix + ": conv_output_shape on non-conv layer");
    if (layer.stride_h < 1 || layer.stride_w < 1)
        throw SpecError(prefix + ": stride must be >= 1");
    if (layer.filter_h < 1 || layer.filter_w < 1)
        throw SpecError(prefix + ": filter must be >= 1");
    if (layer.pad.top < 0 || layer.pad.bottom < 0 || layer.pad.left < 0 || layer.pad.right < 0)
        throw SpecError(prefix + ": pad must be >= 0");
    const int padded_h = input.height + layer.pad.top + layer.pad.bottom;
    const int padded_w = input.width + layer.pad.left + layer.pad.right;
    if (layer.filter_h > padded_h || layer.filter_w > padded_w)
        throw SpecError(prefix + ": filter " + std::to_string(layer.filter_h) + "x" +
                        std::to_string(layer.filter_w) + " larger than padded input " +
                        std::to_string(padded_h) + "x" + std::to_string(padded_w));
    TensorShape out;
    out.height = (padded_h - layer.filter_h) / layer.stride_h + 1;
    out.width = (padded_w - layer.filter_w) / layer.stride_w + 1;
    out.channels = layer.out_channels;
    if (out.channels < 1)
        throw SpecError(prefix + ": out_channels must be >= 1");
    return out;
}

namespace {

void require_keys(const json& obj, std::initializer_list<const char*> keys,
                  const std::string& what) {
    for (const char* k : keys)
        if (!obj.contains(k))
            throw SpecError(what + ": missing field '" + k + "'");
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const char* k : keys)
            if (key == k) known = true;
        if (!known)
            throw SpecError(what + ": unknown field '" + key + "'");
    }
}

int get_int(const json& obj, const char* key, const std::string& what) {
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw SpecError(what + ": field '" + key + "' must be an integer");
    return v.get<int>();
}

std::vector<int> get_int_array(const json& obj, const char* key, std::size_t n,
                               const std::string& what) {
    const json& v = obj.at(key);
    if (!v.is_array() || v.size() != n)
        throw SpecError(what + ": field '" + key + "' must be an array of " + std::to_string(n) +
                        " integers");
    std::vector<int> out;
    for (const json& e : v) {
        if (!e.is_number_integer())
            throw SpecError(what + ": field '" + key + "' must be an array of " +
                            std::to_string(n) + " integers");
        out.push_back(e.get<int>());
    }
    return out;
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

}  // namespace

NetworkSpec parse_network(const std::string& manifest_text) {
    const json j = parse_json(manifest_text, "network manifest");
    if (!j.is_object())
        throw SpecError("network manifest: root must be an object");
    require_keys(j, {"input", "layers"}, "network manifest");

    NetworkSpec spec;
    const json& in = j.at("input");
    if (!in.is_object())
        throw SpecError("input: must be an object");
    require_keys(in, {"h", "w", "c"}, "input");
    spec.input.height = get_int(in, "h", "input");
    spec.input.width = get_int(in, "w", "input");
    spec.input.channels = get_int(in, "c", "input");
    if (spec.input.height < 1 || spec.input.width < 1 || spec.input.channels < 1)
        throw SpecError("input: dimensions must be >= 1");

    const json& layers = j.at("layers");
    if (!layers.is_array())
        throw SpecError("network manifest: field 'layers' must be an array");

    TensorShape cur = spec.input;
    int index = 0;
    for (const json& lj : layers) {
        ++index;
        const std::string prefix = "layer " + std::to_string(index);
        if (!lj.is_object())
            throw SpecError(prefix + ": must be an object");
        if (!lj.contains("kind") || !lj.at("kind").is_string())
            throw SpecError(prefix + ": missing field 'kind'");
        const std::string kind = lj.at("kind").get<std::string>();

        LayerSpec ls;
        ls.index = index;
        ls.in_shape = cur;
        if (kind == "conv") {
            require_keys(lj, {"kind", "k", "stride", "pad", "out_channels"}, prefix);
            ls.kind = LayerKind::Conv;
            const auto k = get_int_array(lj, "k", 2, prefix);
            const auto stride = get_int_array(lj, "stride", 2, prefix);
            const auto pad = get_int_array(lj, "pad", 4, prefix);
            ls.filter_h = k[0];
            ls.filter_w = k[1];
            ls.stride_h = stride[0];
            ls.stride_w = stride[1];
            ls.pad = {pad[0], pad[1], pad[2], pad[3]};
            ls.out_channels = get_int(lj, "out_channels", prefix);
            ls.out_shape = conv_output_shape(cur, ls);
        } else if (kind == "fc") {
            require_keys(lj, {"kind", "out"}, prefix);
            ls.kind = LayerKind::Fc;
            ls.out_channels = get_int(lj, "out", prefix);
            if (ls.out_channels < 1)
                throw SpecError(prefix + ": out must be >= 1");
            ls.out_shape = {1, 1, ls.out_channels};
        } else {
            throw SpecError(prefix + ": unknown kind '" + kind + "'");
        }
        cur = ls.out_shape;
        spec.layers.push_back(ls);
    }
    return spec;
}

std::string serialize_network(const NetworkSpec& spec) {
    json j;
    j["input"] = {{"h", spec.input.height}, {"w", spec.input.width}, {"c", spec.input.channels}};
    j["layers"] = json::array();
    for (const LayerSpec& ls : spec.layers) {
        json lj;
        if (ls.kind == LayerKind::Conv) {
            lj["kind"] = "conv";
            lj["k"] = {ls.filter_h, ls.filter_w};
            lj["stride"] = {ls.stride_h, ls.stride_w};
            lj["pad"] = {ls.pad.top, ls.pad.bottom, ls.pad.left, ls.pad.right};
            lj["out_channels"] = ls.out_channels;
        } else {
            lj["kind"] = "fc";
            lj["out"] = ls.out_channels;
        }
        j["layers"].push_back(lj);
    }
    return j.dump(2) + "\n";
}

int LayerWeights::count() const {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

const LayerWeights& WeightStore::layer(int index) const {
    if (index < 1 || index > layer_count())
        throw SpecError("weights for layer " + std::to_string(index) + " out of range");
    return layers_[static_cast<std::size_t>(index) - 1];
}

float WeightStore::conv(int l, int out_c, int in_c, int k_row, int k_col) const {
    const LayerWeights& lw = layer(l);
    const int in_ch = lw.shape[1], kh = lw.shape[2], kw = lw.shape[3];
    const std::size_t idx =
        static_cast<std::size_t>(((out_c * in_ch + in_c) * kh + k_row) * kw + k_col);
    return lw.values[idx];
}

float WeightStore::fc(int l, int out, int in) const {
    const LayerWeights& lw = layer(l);
    return lw.values[static_cast<std::size_t>(out) * static_cast<std::size_t>(lw.shape[1]) +
                     static_cast<std::size_t>(in)];
}

namespace {

std::vector<int> expected_weight_shape(const LayerSpec& ls) {
    if (ls.kind == LayerKind::Conv)
        return {ls.out_channels, ls.in_shape.channels, ls.filter_h, ls.filter_w};
    return {ls.out_channels, ls.in_shape.count()};
}

std::string shape_text(const std::vector<int>& s) {
    std::string t = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) t += ",";
        t += std::to_string(s[i]);
    }
    return t + "]";
}

}  // namespace

WeightStore load_weights(const NetworkSpec& spec, const std::vector<std::uint8_t>& blob,
                         const std::string& manifest_json) {
    std::size_t expected_bytes = 0;
    for (const LayerSpec& ls : spec.layers) {
        std::size_t n = 1;
        for (int d : expected_weight_shape(ls)) n *= static_cast<std::size_t>(d);
        expected_bytes += n * 4;
    }
    if (blob.size() != expected_bytes)
        throw SpecError("weight blob size mismatch: expected " + std::to_string(expected_bytes) +
                        " bytes, got " + std::to_string(blob.size()));

    const json j = parse_json(manifest_json, "weight manifest");
    if (!j.is_array())
        throw SpecError("weight manifest: root must be an array");
    if (static_cast<int>(j.size()) != spec.layer_count())
        throw SpecError("weight manifest: expected " + std::to_string(spec.layer_count()) +
                        " entries, got " + std::to_string(j.size()));

    std::vector<LayerWeights> out;
    std::size_t running = 0;
    for (int i = 0; i < spec.layer_count(); ++i) {
        const std::string prefix = "weight manifest layer " + std::to_string(i + 1);
        const json& e = j.at(static_cast<std::size_t>(i));
        if (!e.is_object())
            throw SpecError(prefix + ": must be an object");
        require_keys(e, {"layer", "shape", "offset_bytes", "length_bytes"}, prefix);
        if (get_int(e, "layer", prefix) != i + 1)
            throw SpecError(prefix + ": entries must appear in network order");

        const std::vector<int> want = expected_weight_shape(spec.layers[static_cast<std::size_t>(i)]);
        const auto got = get_int_array(e, "shape", want.size(), prefix);
        if (got != want)
            throw SpecError(prefix + ": shape " + shape_text(got) + " does not match network " +
                            shape_text(want));

        std::size_t count = 1;
        for (int d : want) count *= static_cast<std::size_t>(d);
        const auto offset = static_cast<std::size_t>(get_int(e, "offset_bytes", prefix));
        const auto length = static_cast<std::size_t>(get_int(e, "length_bytes", prefix));
        if (offset != running)
            throw SpecError(prefix + ": offset " + std::to_string(offset) +
                            " breaks network-order concatenation (expected " +
                            std::to_string(running) + ")");
        if (length != count * 4)
            throw SpecError(prefix + ": length " + std::to_string(length) + " bytes, expected " +
                            std::to_string(count * 4));
        running += length;

        LayerWeights lw;
        lw.shape = want;
        lw.values.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            const std::uint8_t* p = blob.data() + offset + k * 4;
            const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                                    (static_cast<std::uint32_t>(p[1]) << 8) |
                                    (static_cast<std::uint32_t>(p[2]) << 16) |
                                    (static_cast<std::uint32_t>(p[3]) << 24);
            lw.values[k] = std::bit_cast<float>(u);
        }
        out.push_back(std::move(lw));
    }
    return WeightStore(std::move(out));
}

std::vector<std::uint8_t> serialize_weights(const NetworkSpec& spec, const WeightStore& weights) {
    std::vector<std::uint8_t> blob;
    for (int l = 1; l <= spec.layer_count(); ++l) {
        const LayerWeights& lw = weights.layer(l);
        for (float f : lw.values) {
            const auto u = std::bit_cast<std::uint32_t>(f);
            blob.push_back(static_cast<std::uint8_t>(u & 0xff));
            blob.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
            blob.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
            blob.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
        }
    }
    return blob;
}

std::string weight_manifest_json(const NetworkSpec& spec) {
    json j = json::array();
    std::size_t offset = 0;
    for (const LayerSpec& ls : spec.layers) {
        const std::vector<int> shape = expected_weight_shape(ls);
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        json e;
        e["layer"] = ls.index;
        e["shape"] = shape;
        e["offset_bytes"] = offset;
        e["length_bytes"] = count * 4;
        offset += count * 4;
        j.push_back(e);
    }
    return j.dump(2) + "\n";
}

WeightStore zero_weights(const NetworkSpec& spec) {
    std::vector<LayerWeights> out;
    for (const LayerSpec& ls : spec.layers) {
        LayerWeights lw;
        lw.shape = expected_weight_shape(ls);
        lw.values.assign(static_cast<std::size_t>(lw.count()), 0.0f);
        out.push_back(std::move(lw));
    }
    return WeightStore(std::move(out));
}

}  // namespace xbar
