#include "caba/config.hpp"

#include <cstdlib>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>

#include "caba/isa.hpp"

namespace caba {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument(msg); }

uint64_t parse_u64(const std::string& key, const std::string& value) {
    size_t used = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(value, &used, 0);
    } catch (const std::invalid_argument&) {
        bad("config key '" + key + "': '" + value + "' is not a number");
    } catch (const std::out_of_range&) {
        bad("config key '" + key + "': '" + value + "' is out of range");
    }
    if (used != value.size())
        bad("config key '" + key + "': trailing junk in '" + value + "'");
    return v;
}

double parse_f(const std::string& key, const std::string& value) {
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        bad("config key '" + key + "': '" + value + "' is not a number");
    }
    if (used != value.size())
        bad("config key '" + key + "': trailing junk in '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on")
        return true;
    if (value == "0" || value == "false" || value == "no" || value == "off")
        return false;
    bad("config key '" + key + "': '" + value + "' is not a boolean");
}

struct Setting {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define U32(key, field) \
    {key, [](RunConfig& c, const std::string& v) { c.field = uint32_t(parse_u64(key, v)); }}
#define U64(key, field) \
    {key, [](RunConfig& c, const std::string& v) { c.field = parse_u64(key, v); }}

const std::vector<Setting>& settings() {
    static const std::vector<Setting> s = {
        {"label", [](RunConfig& c, const std::string& v) { c.label = v; }},
        {"algorithm",
         [](RunConfig& c, const std::string& v) {
             c.sim.modes.best_of_all = false;
             if (v == "none")
                 c.sim.modes.algorithm = Algorithm::NONE;
             else if (v == "bdi")
                 c.sim.modes.algorithm = Algorithm::BDI;
             else if (v == "fpc")
                 c.sim.modes.algorithm = Algorithm::FPC;
             else if (v == "cpack")
                 c.sim.modes.algorithm = Algorithm::CPACK;
             else if (v == "best") {
                 c.sim.modes.algorithm = Algorithm::NONE;
                 c.sim.modes.best_of_all = true;
             } else
                 bad("algorithm must be none, bdi, fpc, cpack, or best (got '" + v +
                     "')");
         }},
        {"uncompressed_l2",
         [](RunConfig& c, const std::string& v) {
             c.sim.modes.uncompressed_l2 = parse_bool("uncompressed_l2", v);
         }},
        {"caba_absent",
         [](RunConfig& c, const std::string& v) {
             c.sim.modes.caba_absent = parse_bool("caba_absent", v);
         }},
        {"line_size",
         [](RunConfig& c, const std::string& v) {
             uint32_t n = uint32_t(parse_u64("line_size", v));
             c.sim.codec.line_size = n;
             c.sim.mem.line_size = n;
         }},
        {"burst_size",
         [](RunConfig& c, const std::string& v) {
             uint32_t n = uint32_t(parse_u64("burst_size", v));
             c.sim.codec.burst_size = n;
             c.sim.mem.burst_size = n;
         }},
        {"pattern",
         [](RunConfig& c, const std::string& v) {
             auto p = pattern_from_string(v);
             if (!p)
                 bad("pattern: unknown access pattern '" + v + "'");
             c.workload.pattern = *p;
         }},
        {"profile",
         [](RunConfig& c, const std::string& v) {
             auto p = profile_from_string(v);
             if (!p)
                 bad("profile: unknown data profile '" + v + "'");
             c.workload.profile = *p;
         }},
        U32("warps", workload.warps),
        U32("ops_per_warp", workload.ops_per_warp),
        U64("lines_per_warp", workload.lines_per_warp),
        U64("base_line", workload.base_line),
        U32("access_size", workload.access_size),
        U32("alu_every", workload.alu_every),
        U64("seed", workload.seed),
        U32("l1_bytes", sim.mem.l1_bytes),
        U32("l1_ways", sim.mem.l1_ways),
        U32("l1_hit_latency", sim.mem.l1_hit_latency),
        U32("l2_bytes", sim.mem.l2_bytes),
        U32("l2_ways", sim.mem.l2_ways),
        U32("l2_hit_latency", sim.mem.l2_hit_latency),
        U32("store_buffer_lines", sim.mem.store_buffer_lines),
        U32("mem_queue_depth", sim.mem.mem_queue_depth),
        U32("banks", sim.mem.banks),
        U32("cycles_per_burst", sim.mem.cycles_per_burst),
        U32("row_miss_penalty", sim.mem.row_miss_penalty),
        U32("row_bypass_depth", sim.mem.row_bypass_depth),
        U32("row_lines", sim.mem.row_lines),
        U32("md_cache_bytes", sim.mem.md_cache_bytes),
        U32("md_cache_ways", sim.mem.md_cache_ways),
        U32("md_block_bytes", sim.mem.md_block_bytes),
        U64("memory_bytes", sim.mem.memory_bytes),
        U32("warps_per_sm", sim.pipe.warps_per_sm),
        U32("warp_width", sim.pipe.warp_width),
        U32("issue_width", sim.pipe.issue_width),
        U32("alu_latency", sim.pipe.alu_latency),
        U32("assist_mem_latency", sim.pipe.assist_mem_latency),
        U32("awt_entries", sim.awc.awt_entries),
        U32("awb_low_entries", sim.awc.awb_low_entries),
        U32("high_slots_per_warp", sim.awc.high_slots_per_warp),
        U32("assist_decode_per_cycle", sim.awc.assist_decode_per_cycle),
        {"throttle_threshold",
         [](RunConfig& c, const std::string& v) {
             c.sim.awc.throttle_threshold = parse_f("throttle_threshold", v);
         }},
        U64("throttle_window", sim.awc.throttle_window),
        U64("low_priority_timeout", sim.awc.low_priority_timeout),
        U32("parent_regs_per_thread", parent_regs_per_thread),
        U32("total_registers", total_registers),
        U64("max_cycles", sim.max_cycles),
    };
    return s;
}

#undef U32
#undef U64

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Setting& s : settings())
        keys.push_back(s.key);
    return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const Setting& s : settings()) {
        if (key == s.key) {
            s.set(cfg, value);
            return;
        }
    }
    bad("unknown config key '" + key + "'");
}

RunConfig parse_config(std::istream& is) {
    RunConfig cfg;
    std::string raw;
    size_t lineno = 0;
    while (std::getline(is, raw)) {
        lineno++;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::string text = trim(raw);
        if (text.empty())
            continue;
        auto eq = text.find('=');
        if (eq == std::string::npos)
            bad("config line " + std::to_string(lineno) + ": expected key = value");
        try {
            apply_setting(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            bad("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void validate(const RunConfig& cfg) {
    const auto& mem = cfg.sim.mem;
    const auto& pipe = cfg.sim.pipe;
    const auto& awc = cfg.sim.awc;
    const auto& wl = cfg.workload;

    if (mem.line_size == 0 || mem.line_size % 8 != 0)
        bad("line_size must be a positive multiple of 8");
    if (mem.burst_size == 0 || mem.line_size % mem.burst_size != 0)
        bad("burst_size must divide line_size");
    if (mem.memory_bytes == 0 || mem.memory_bytes % mem.line_size != 0)
        bad("memory_bytes must be a positive multiple of line_size");
    for (auto [name, bytes, ways] :
         {std::tuple{"l1", mem.l1_bytes, mem.l1_ways},
          std::tuple{"l2", mem.l2_bytes, mem.l2_ways}}) {
        if (ways == 0 || bytes == 0 || bytes % (uint64_t(mem.line_size) * ways) != 0)
            bad(std::string(name) + "_bytes must be a positive multiple of line_size * " +
                name + "_ways");
    }
    if (mem.md_cache_ways == 0 || mem.md_block_bytes == 0 ||
        mem.md_cache_bytes % (uint64_t(mem.md_block_bytes) * mem.md_cache_ways) != 0)
        bad("md_cache_bytes must be a positive multiple of md_block_bytes * md_cache_ways");
    if (mem.store_buffer_lines == 0)
        bad("store_buffer_lines must be at least 1");
    if (mem.mem_queue_depth == 0)
        bad("mem_queue_depth must be at least 1");
    if (mem.banks == 0 || mem.cycles_per_burst == 0 || mem.row_lines == 0)
        bad("banks, cycles_per_burst, and row_lines must be at least 1");

    if (pipe.warps_per_sm == 0 || pipe.warp_width == 0 || pipe.issue_width == 0)
        bad("warps_per_sm, warp_width, and issue_width must be at least 1");
    if (pipe.alu_latency == 0)
        bad("alu_latency must be at least 1");

    if (wl.warps == 0 || wl.warps > pipe.warps_per_sm)
        bad("warps must be between 1 and warps_per_sm");
    if (wl.access_size == 0 || wl.access_size > mem.line_size ||
        mem.line_size % wl.access_size != 0)
        bad("access_size must divide line_size");
    if (wl.lines_per_warp == 0)
        bad("lines_per_warp must be at least 1");
    uint64_t span_lines = wl.base_line + uint64_t(wl.warps) * wl.lines_per_warp;
    if (span_lines * mem.line_size > mem.memory_bytes)
        bad("the warp partitions exceed memory_bytes");
    if (cfg.sim.max_cycles == 0)
        bad("max_cycles must be at least 1");

    bool assists = !cfg.sim.modes.caba_absent &&
                   (cfg.sim.modes.algorithm != Algorithm::NONE ||
                    cfg.sim.modes.best_of_all);
    if (assists) {
        if (awc.awt_entries == 0)
            bad("awt_entries must be at least 1 when assists run");
        if (awc.awb_low_entries == 0)
            bad("awb_low_entries must be at least 1: writeback compression "
                "could never activate and full store-buffer lines would stall "
                "their warps forever");
        if (awc.high_slots_per_warp == 0)
            bad("high_slots_per_warp must be at least 1: fills of compressed "
                "lines could never be translated");
        if (awc.assist_decode_per_cycle == 0)
            bad("assist_decode_per_cycle must be at least 1");
        if (!(awc.throttle_threshold > 0.0 && awc.throttle_threshold <= 1.0))
            bad("throttle_threshold must be in (0, 1]");
        if (awc.throttle_window == 0)
            bad("throttle_window must be at least 1");

        SubroutineLibrary lib = build_library(cfg.sim.codec);
        bool have_cpack = lib.find(Algorithm::CPACK, 0, Direction::Compress) >= 0;
        if (!have_cpack && (cfg.sim.modes.best_of_all ||
                            cfg.sim.modes.algorithm == Algorithm::CPACK))
            bad("no C-Pack compression routine exists at line_size " +
                std::to_string(mem.line_size) +
                ": its word tags cover at most 32 words per line");

        uint32_t assist_regs = 0;
        for (const Subroutine& sr : lib.all())
            assist_regs = std::max(assist_regs, sr.register_requirement);
        uint64_t need = uint64_t(cfg.parent_regs_per_thread) * pipe.warp_width *
                            pipe.warps_per_sm +
                        uint64_t(awc.awt_entries) * assist_regs;
        if (need > cfg.total_registers)
            bad("register file too small: parents need " +
                std::to_string(uint64_t(cfg.parent_regs_per_thread) *
                               pipe.warp_width * pipe.warps_per_sm) +
                " plus " + std::to_string(uint64_t(awc.awt_entries) * assist_regs) +
                " for assist contexts, but only " +
                std::to_string(cfg.total_registers) + " exist");
    } else {
        uint64_t need =
            uint64_t(cfg.parent_regs_per_thread) * pipe.warp_width * pipe.warps_per_sm;
        if (need > cfg.total_registers)
            bad("register file too small: parents alone need " +
                std::to_string(need) + " of " + std::to_string(cfg.total_registers));
    }
}

std::string algorithm_name(const RunConfig& cfg) {
    if (cfg.sim.modes.caba_absent)
        return "absent";
    if (cfg.sim.modes.best_of_all)
        return "best";
    switch (cfg.sim.modes.algorithm) {
    case Algorithm::BDI:
        return "bdi";
    case Algorithm::FPC:
        return "fpc";
    case Algorithm::CPACK:
        return "cpack";
    case Algorithm::NONE:
        return "none";
    }
    return "none";
}

std::string output_dir() {
    const char* d = std::getenv("CABASIM_OUTPUT_DIR");
    return (d && *d) ? d : ".";
}

} // namespace caba
