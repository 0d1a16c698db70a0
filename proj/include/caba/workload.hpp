#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace caba {

enum class OpKind : uint8_t { Load, Store, Alu };

// One parent-warp instruction. Memory ops name a byte address and size;
// ALU ops ignore both. Store payloads are not carried here: they derive
// deterministically from (line, data profile, seed), so a trace plus a
// profile and seed fully determines a run.
struct TraceOp {
    uint32_t warp = 0;
    OpKind kind = OpKind::Alu;
    uint64_t addr = 0;
    uint32_t size = 0;
};

enum class DataProfile : uint8_t {
    Zeros,      // all-zero lines
    Repeated,   // one 64-bit value per line
    LowDelta,   // 64-bit words near a shared base
    Pattern,    // zero / narrow / random 32-bit words
    Dictionary, // few distinct 32-bit words, some low-byte variants
    Random,     // incompressible
    Mixed,      // per-line rotation over the above
};

enum class AccessPattern : uint8_t {
    StreamStore,     // sequential full-line stores
    StreamLoad,      // sequential loads over profile-initialized memory
    ReadModifyWrite, // load a line's chunks, then store them
    RandomMix,       // randomized loads/stores/ALU inside the partition
};

struct WorkloadConfig {
    AccessPattern pattern = AccessPattern::StreamStore;
    DataProfile profile = DataProfile::LowDelta;
    uint32_t warps = 8;
    uint32_t ops_per_warp = 512;
    uint64_t lines_per_warp = 64; // disjoint per-warp line partitions
    uint64_t base_line = 0;
    uint32_t access_size = 32; // bytes per memory op
    uint32_t alu_every = 0;    // insert an ALU op after every N memory ops
    uint64_t seed = 1;
};

// The bytes a line holds under a profile; used both for store payloads and
// for pristine-memory initialization, and shared with any reference model.
std::vector<uint8_t> line_data(uint64_t line, DataProfile profile, uint64_t seed,
                               uint32_t line_size);

// Per-warp program order, interleaved round-robin across warps.
std::vector<TraceOp> generate_workload(const WorkloadConfig& cfg, uint32_t line_size);

// "#cabatrace v1" text: one `warp op addr size` row per instruction, all
// numeric fields hex, op one of ld/st/alu. '#' starts a comment.
void write_trace(std::ostream& os, const std::vector<TraceOp>& ops);
std::vector<TraceOp> parse_trace(std::istream& is);

const char* to_string(OpKind k);
const char* to_string(DataProfile p);
const char* to_string(AccessPattern p);
std::optional<DataProfile> profile_from_string(const std::string& s);
std::optional<AccessPattern> pattern_from_string(const std::string& s);

} // namespace caba
