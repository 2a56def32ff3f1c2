#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "xbar/mapper.hpp"

namespace xbar {

struct LayerUtilization {
    int layer = 0;
    long long axons = 0;
    long long neurons = 0;
    int cores = 0;
};

struct UtilizationReport {
    CoreSpec core;
    std::vector<LayerUtilization> layers;  // utilization tuple of a full tile
    int total_cores = 0;
    std::vector<std::string> notes;  // free text, one report line each
};

UtilizationReport make_utilization_report(const MappingResult& mapping,
                                          std::vector<std::string> notes = {});

// report.csv: core capacities, one row per layer, total, then notes.
void emit_utilization_report(const UtilizationReport& report, std::ostream& os);

// connections.csv: inter-core routing "src_core,src_slot,dst_core,dst_axon,weight".
// The input tensor is pseudo-core -1 with src_slot the input linear index.
// Wires carry spikes, not weights, so the weight column is always 1. Body
// lines are sorted lexicographically.
void emit_connection_list(const MappingResult& mapping, std::ostream& os);

// connectivity_L{n}.csv: 0/1 matrix, rows = source cores of layer n-1 (or the
// pseudo-core -1 for n == 1), columns = cores of layer n.
void emit_connectivity_matrix(const MappingResult& mapping, int layer, std::ostream& os);

// cores/core_{id}.csv: first row destination ids, first column source ids,
// body the weight matrix.
void emit_core_dump(const CoreAllocation& core, std::ostream& os);

// Writes the whole artifact tree under out_dir:
//   report.csv, connections.csv, connectivity_L{n}.csv, cores/core_{id}.csv.
// Identical mappings produce byte-identical trees.
void write_artifacts(const MappingResult& mapping, const std::filesystem::path& out_dir,
                     const std::vector<std::string>& notes = {});

struct ConnectionRecord {
    int src_core = 0;
    int src_slot = 0;
    int dst_core = 0;
    int dst_axon = 0;
    float weight = 0.0f;
};

std::vector<ConnectionRecord> load_connection_list(const std::filesystem::path& path);
CoreAllocation load_core_dump(const std::filesystem::path& path, int core_id);

// Rebuilds a runnable MappingResult from an artifact tree (the debugger path:
// verification must see what was emitted, not what is in memory). Plans are
// not reconstructed. Missing or malformed files throw IoError.
MappingResult load_mapping(const std::filesystem::path& out_dir, const NetworkSpec& spec);

}  // namespace xbar
