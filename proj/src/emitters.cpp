#include "xbar/emitters.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "text_util.hpp"

namespace xbar {

UtilizationReport make_utilization_report(const MappingResult& mapping,
                                          std::vector<std::string> notes) {
    if (mapping.plans.size() != static_cast<std::size_t>(mapping.spec.layer_count()))
        throw Error("utilization report needs the mapper's tile plans");
    UtilizationReport report;
    report.core = mapping.core;
    report.notes = std::move(notes);
    report.total_cores = mapping.total_cores();
    for (int l = 1; l <= mapping.spec.layer_count(); ++l) {
        const TilePlan& plan = mapping.plans[static_cast<std::size_t>(l) - 1];
        LayerUtilization u;
        u.layer = l;
        u.axons = plan.axons_used;
        u.neurons = plan.neurons_used;
        u.cores = mapping.layer_core_count(l);
        report.layers.push_back(u);
    }
    return report;
}

void emit_utilization_report(const UtilizationReport& report, std::ostream& os) {
    os << "core_axons," << report.core.axons << '\n';
    os << "core_neurons," << report.core.neurons << '\n';
    os << "layer,axons,neurons,cores\n";
    for (const LayerUtilization& u : report.layers)
        os << u.layer << ',' << u.axons << ',' << u.neurons << ',' << u.cores << '\n';
    os << "total,,," << report.total_cores << '\n';
    // Note text is everything after the first comma; it may itself contain
    // commas and is not quoted.
    for (const std::string& note : report.notes) os << "note," << note << '\n';
}

namespace {

struct SlotRef {
    int core = -1;
    int slot = -1;
};

// neuron key -> producing (core, slot) over the whole mapping.
std::unordered_map<std::int64_t, SlotRef> producer_map(const MappingResult& mapping) {
    std::unordered_map<std::int64_t, SlotRef> map;
    for (const CoreAllocation& core : mapping.cores)
        for (int n = 0; n < core.neuron_count(); ++n)
            map[neuron_key(core.neuron_slots[static_cast<std::size_t>(n)])] = {core.core_id, n};
    return map;
}

}  // namespace

void emit_connection_list(const MappingResult& mapping, std::ostream& os) {
    const auto producers = producer_map(mapping);
    std::vector<std::string> lines;
    for (const CoreAllocation& core : mapping.cores) {
        for (int a = 0; a < core.axon_count(); ++a) {
            const NeuronId& src = core.axon_slots[static_cast<std::size_t>(a)];
            std::string line;
            if (src.layer == 0) {
                line = "-1," + std::to_string(neuron_index(src, mapping.spec.input));
            } else {
                const auto it = producers.find(neuron_key(src));
                if (it == producers.end())
                    throw Error("no producer for axon source " + to_string(src));
                line = std::to_string(it->second.core) + ',' + std::to_string(it->second.slot);
            }
            line += ',' + std::to_string(core.core_id) + ',' + std::to_string(a) + ",1";
            lines.push_back(std::move(line));
        }
    }
    std::sort(lines.begin(), lines.end());
    os << "src_core,src_slot,dst_core,dst_axon,weight\n";
    for (const std::string& line : lines) os << line << '\n';
}

void emit_connectivity_matrix(const MappingResult& mapping, int layer, std::ostream& os) {
    if (layer < 1 || layer > mapping.spec.layer_count())
        throw SpecError("connectivity matrix: layer " + std::to_string(layer) + " out of range");
    const int dst_begin = mapping.layer_core_offsets[static_cast<std::size_t>(layer) - 1];
    const int dst_end = mapping.layer_core_offsets[static_cast<std::size_t>(layer)];

    std::vector<int> src_cores;
    std::unordered_map<std::int64_t, int> src_of;  // neuron key -> source core id
    if (layer == 1) {
        src_cores.push_back(-1);
    } else {
        const int src_begin = mapping.layer_core_offsets[static_cast<std::size_t>(layer) - 2];
        const int src_end = dst_begin;
        for (int ci = src_begin; ci < src_end; ++ci) {
            const CoreAllocation& core = mapping.cores[static_cast<std::size_t>(ci)];
            src_cores.push_back(core.core_id);
            for (const NeuronId& id : core.neuron_slots) src_of[neuron_key(id)] = core.core_id;
        }
    }

    // linked[src index][dst index]
    std::vector<std::vector<int>> linked(src_cores.size(),
                                         std::vector<int>(static_cast<std::size_t>(dst_end - dst_begin), 0));
    std::unordered_map<int, std::size_t> src_row;
    for (std::size_t i = 0; i < src_cores.size(); ++i) src_row[src_cores[i]] = i;
    for (int ci = dst_begin; ci < dst_end; ++ci) {
        const CoreAllocation& core = mapping.cores[static_cast<std::size_t>(ci)];
        for (const NeuronId& src : core.axon_slots) {
            int from = -1;
            if (src.layer != 0) {
                const auto it = src_of.find(neuron_key(src));
                if (it == src_of.end()) throw Error("no producer for axon source " + to_string(src));
                from = it->second;
            }
            linked[src_row.at(from)][static_cast<std::size_t>(ci - dst_begin)] = 1;
        }
    }

    os << "src";
    for (int ci = dst_begin; ci < dst_end; ++ci)
        os << ',' << mapping.cores[static_cast<std::size_t>(ci)].core_id;
    os << '\n';
    for (std::size_t i = 0; i < src_cores.size(); ++i) {
        os << src_cores[i];
        for (int v : linked[i]) os << ',' << v;
        os << '\n';
    }
}

void emit_core_dump(const CoreAllocation& core, std::ostream& os) {
    for (int n = 0; n < core.neuron_count(); ++n)
        os << ',' << to_string(core.neuron_slots[static_cast<std::size_t>(n)]);
    os << '\n';
    for (int a = 0; a < core.axon_count(); ++a) {
        os << to_string(core.axon_slots[static_cast<std::size_t>(a)]);
        for (int n = 0; n < core.neuron_count(); ++n) os << ',' << format_float(core.weight_at(a, n));
        os << '\n';
    }
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    return os;
}

void close_checked(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void write_artifacts(const MappingResult& mapping, const std::filesystem::path& out_dir,
                     const std::vector<std::string>& notes) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "cores", ec);
    if (ec) throw IoError("cannot create '" + (out_dir / "cores").string() + "': " + ec.message());

    {
        const auto path = out_dir / "report.csv";
        auto os = open_out(path);
        emit_utilization_report(make_utilization_report(mapping, notes), os);
        close_checked(os, path);
    }
    {
        const auto path = out_dir / "connections.csv";
        auto os = open_out(path);
        emit_connection_list(mapping, os);
        close_checked(os, path);
    }
    for (int l = 1; l <= mapping.spec.layer_count(); ++l) {
        const auto path = out_dir / ("connectivity_L" + std::to_string(l) + ".csv");
        auto os = open_out(path);
        emit_connectivity_matrix(mapping, l, os);
        close_checked(os, path);
    }
    for (const CoreAllocation& core : mapping.cores) {
        const auto path = out_dir / "cores" / ("core_" + std::to_string(core.core_id) + ".csv");
        auto os = open_out(path);
        emit_core_dump(core, os);
        close_checked(os, path);
    }
}

namespace {

// Neuron ids carry one comma inside their [row,col] brackets; only commas at
// bracket depth 0 separate cells.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cell;
    int depth = 0;
    for (char ch : line) {
        if (ch == '[') ++depth;
        if (ch == ']' && depth > 0) --depth;
        if (ch == ',' && depth == 0) {
            fields.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    fields.push_back(std::move(cell));
    return fields;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

NeuronId parse_id_checked(const std::string& text, const std::filesystem::path& path) {
    try {
        return parse_neuron_id(text);
    } catch (const SpecError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

}  // namespace

std::vector<ConnectionRecord> load_connection_list(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty() || lines[0] != "src_core,src_slot,dst_core,dst_axon,weight")
        throw IoError(path.string() + ": missing connection-list header");
    std::vector<ConnectionRecord> records;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() != 5)
            throw IoError(path.string() + ": line " + std::to_string(i + 1) + " has " +
                          std::to_string(fields.size()) + " fields, expected 5");
        const std::string what = path.string() + " line " + std::to_string(i + 1);
        ConnectionRecord r;
        r.src_core = parse_int_strict(fields[0], what);
        r.src_slot = parse_int_strict(fields[1], what);
        r.dst_core = parse_int_strict(fields[2], what);
        r.dst_axon = parse_int_strict(fields[3], what);
        r.weight = parse_float_strict(fields[4], what);
        records.push_back(r);
    }
    return records;
}

CoreAllocation load_core_dump(const std::filesystem::path& path, int core_id) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw IoError(path.string() + ": empty core dump");
    const auto header = split_csv_line(lines[0]);
    if (header.size() < 2 || !header[0].empty())
        throw IoError(path.string() + ": malformed core-dump header");

    CoreAllocation core;
    core.core_id = core_id;
    for (std::size_t i = 1; i < header.size(); ++i)
        core.neuron_slots.push_back(parse_id_checked(header[i], path));
    core.layer = core.neuron_slots.front().layer;

    const std::size_t n_cols = core.neuron_slots.size();
    core.weights.reserve((lines.size() - 1) * n_cols);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() != n_cols + 1)
            throw IoError(path.string() + ": line " + std::to_string(i + 1) + " has " +
                          std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(n_cols + 1));
        core.axon_slots.push_back(parse_id_checked(fields[0], path));
        for (std::size_t n = 1; n < fields.size(); ++n)
            core.weights.push_back(parse_float_strict(
                fields[n], path.string() + " line " + std::to_string(i + 1)));
    }
    return core;
}

MappingResult load_mapping(const std::filesystem::path& out_dir, const NetworkSpec& spec) {
    if (!std::filesystem::is_directory(out_dir))
        throw IoError("mapping directory '" + out_dir.string() + "' does not exist");
    const auto report_path = out_dir / "report.csv";
    const auto cores_dir = out_dir / "cores";
    if (!std::filesystem::exists(report_path))
        throw IoError("missing artifact '" + report_path.string() + "'");
    if (!std::filesystem::is_directory(cores_dir))
        throw IoError("missing artifact directory '" + cores_dir.string() + "'");

    MappingResult result;
    result.spec = spec;

    const std::vector<std::string> report = read_lines(report_path);
    for (const std::string& line : report) {
        const auto fields = split_csv_line(line);
        if (fields.size() == 2 && fields[0] == "core_axons")
            result.core.axons = parse_int_strict(fields[1], report_path.string());
        if (fields.size() == 2 && fields[0] == "core_neurons")
            result.core.neurons = parse_int_strict(fields[1], report_path.string());
    }

    // Core files must form a contiguous id range 0..n-1.
    std::map<int, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(cores_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 9 && name.starts_with("core_") && name.ends_with(".csv"))
            files[parse_int_strict(name.substr(5, name.size() - 9), name)] = entry.path();
    }
    if (files.empty())
        throw IoError("no core dumps under '" + cores_dir.string() + "'");
    int expect = 0;
    for (const auto& [id, path] : files) {
        if (id != expect)
            throw IoError("core dump ids not contiguous: expected core_" + std::to_string(expect) +
                          ".csv, found core_" + std::to_string(id) + ".csv");
        ++expect;
        result.cores.push_back(load_core_dump(path, id));
    }

    result.layer_core_offsets.assign(static_cast<std::size_t>(spec.layer_count()) + 1, 0);
    int prev_layer = 1;
    for (const CoreAllocation& core : result.cores) {
        if (core.layer < 1 || core.layer > spec.layer_count())
            throw IoError("core " + std::to_string(core.core_id) + " targets layer " +
                          std::to_string(core.layer) + ", network has " +
                          std::to_string(spec.layer_count()));
        if (core.layer < prev_layer)
            throw IoError("core dumps are not in layer-major order at core " +
                          std::to_string(core.core_id));
        prev_layer = core.layer;
        result.layer_core_offsets[static_cast<std::size_t>(core.layer)]++;
    }
    for (std::size_t l = 1; l < result.layer_core_offsets.size(); ++l)
        result.layer_core_offsets[l] += result.layer_core_offsets[l - 1];
    return result;
}

}  // namespace xbar
