#include "caba/workload.hpp"

#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "caba/bits.hpp"

namespace caba {

namespace {

std::mt19937_64 line_rng(uint64_t seed, uint64_t line) {
    return std::mt19937_64(seed * 0x9E3779B97F4A7C15ull + line * 0xBF58476D1CE4E5B9ull + 1);
}

void fill_zeros(std::vector<uint8_t>&) {}

void fill_repeated(std::vector<uint8_t>& b, std::mt19937_64& r) {
    uint64_t v = r();
    for (size_t i = 0; i + 8 <= b.size(); i += 8)
        store_le(b, i, 8, v);
}

void fill_low_delta(std::vector<uint8_t>& b, std::mt19937_64& r) {
    uint64_t base = r();
    for (size_t i = 0; i + 8 <= b.size(); i += 8) {
        uint64_t w = base + static_cast<uint64_t>(static_cast<int64_t>(static_cast<int8_t>(r())));
        store_le(b, i, 8, w);
    }
}

void fill_pattern(std::vector<uint8_t>& b, std::mt19937_64& r) {
    for (size_t i = 0; i + 4 <= b.size(); i += 4) {
        uint32_t roll = static_cast<uint32_t>(r() % 10);
        uint64_t w;
        if (roll < 5)
            w = 0;
        else if (roll < 8)
            w = static_cast<uint32_t>(static_cast<int32_t>(static_cast<int8_t>(r())));
        else
            w = static_cast<uint32_t>(r());
        store_le(b, i, 4, w);
    }
}

void fill_dictionary(std::vector<uint8_t>& b, std::mt19937_64& r) {
    uint64_t vocab[4];
    for (auto& v : vocab)
        v = (static_cast<uint32_t>(r()) | 0x01000100u);
    for (size_t i = 0; i + 4 <= b.size(); i += 4) {
        uint64_t w = vocab[r() % 4];
        if (r() % 4 == 0)
            w = (w & 0xFFFFFF00u) | (r() & 0xFFu); // low-byte variant
        store_le(b, i, 4, w);
    }
}

void fill_random(std::vector<uint8_t>& b, std::mt19937_64& r) {
    for (auto& x : b)
        x = static_cast<uint8_t>(r());
}

} // namespace

std::vector<uint8_t> line_data(uint64_t line, DataProfile profile, uint64_t seed,
                               uint32_t line_size) {
    std::vector<uint8_t> b(line_size, 0);
    auto r = line_rng(seed, line);
    DataProfile p = profile;
    if (p == DataProfile::Mixed) {
        static constexpr DataProfile kRotation[6] = {
            DataProfile::Zeros,   DataProfile::Repeated,   DataProfile::LowDelta,
            DataProfile::Pattern, DataProfile::Dictionary, DataProfile::Random,
        };
        p = kRotation[line % 6];
    }
    switch (p) {
    case DataProfile::Zeros: fill_zeros(b); break;
    case DataProfile::Repeated: fill_repeated(b, r); break;
    case DataProfile::LowDelta: fill_low_delta(b, r); break;
    case DataProfile::Pattern: fill_pattern(b, r); break;
    case DataProfile::Dictionary: fill_dictionary(b, r); break;
    case DataProfile::Random: fill_random(b, r); break;
    case DataProfile::Mixed: break; // resolved above
    }
    return b;
}

std::vector<TraceOp> generate_workload(const WorkloadConfig& cfg, uint32_t line_size) {
    std::vector<std::vector<TraceOp>> per_warp(cfg.warps);
    const uint32_t chunks = line_size / cfg.access_size;

    for (uint32_t w = 0; w < cfg.warps; ++w) {
        auto& prog = per_warp[w];
        const uint64_t first = cfg.base_line + uint64_t(w) * cfg.lines_per_warp;
        std::mt19937_64 r(cfg.seed * 0x2545F4914F6CDD1Dull + w + 1);
        uint32_t since_alu = 0;

        auto push_mem = [&](OpKind k, uint64_t line, uint32_t chunk) {
            prog.push_back({w, k, line * line_size + uint64_t(chunk) * cfg.access_size,
                            cfg.access_size});
            if (cfg.alu_every > 0 && ++since_alu >= cfg.alu_every) {
                since_alu = 0;
                prog.push_back({w, OpKind::Alu, 0, 0});
            }
        };

        uint64_t line = first;
        uint32_t chunk = 0;
        auto advance = [&]() {
            if (++chunk == chunks) {
                chunk = 0;
                line = first + (line - first + 1) % cfg.lines_per_warp;
            }
        };

        while (prog.size() < cfg.ops_per_warp) {
            switch (cfg.pattern) {
            case AccessPattern::StreamStore:
                push_mem(OpKind::Store, line, chunk);
                advance();
                break;
            case AccessPattern::StreamLoad:
                push_mem(OpKind::Load, line, chunk);
                advance();
                break;
            case AccessPattern::ReadModifyWrite:
                // A full pass of loads over the line, then a full pass of stores.
                for (uint32_t c = 0; c < chunks && prog.size() < cfg.ops_per_warp; ++c)
                    push_mem(OpKind::Load, line, c);
                for (uint32_t c = 0; c < chunks && prog.size() < cfg.ops_per_warp; ++c)
                    push_mem(OpKind::Store, line, c);
                line = first + (line - first + 1) % cfg.lines_per_warp;
                break;
            case AccessPattern::RandomMix: {
                uint32_t roll = static_cast<uint32_t>(r() % 100);
                uint64_t l = first + r() % cfg.lines_per_warp;
                uint32_t c = static_cast<uint32_t>(r() % chunks);
                if (roll < 45)
                    push_mem(OpKind::Load, l, c);
                else if (roll < 85)
                    push_mem(OpKind::Store, l, c);
                else
                    prog.push_back({w, OpKind::Alu, 0, 0});
                break;
            }
            }
        }
        prog.resize(cfg.ops_per_warp);
    }

    std::vector<TraceOp> out;
    out.reserve(size_t(cfg.warps) * cfg.ops_per_warp);
    for (uint32_t i = 0; i < cfg.ops_per_warp; ++i)
        for (uint32_t w = 0; w < cfg.warps; ++w)
            out.push_back(per_warp[w][i]);
    return out;
}

void write_trace(std::ostream& os, const std::vector<TraceOp>& ops) {
    os << "#cabatrace v1\n";
    os << std::hex;
    for (const auto& op : ops)
        os << op.warp << ' ' << to_string(op.kind) << ' ' << op.addr << ' ' << op.size
           << '\n';
    os << std::dec;
}

std::vector<TraceOp> parse_trace(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header != "#cabatrace v1")
        throw std::runtime_error("trace: missing '#cabatrace v1' header");

    std::vector<TraceOp> ops;
    std::string raw;
    size_t lineno = 1;
    while (std::getline(is, raw)) {
        lineno++;
        std::string text = raw.substr(0, raw.find('#'));
        std::istringstream ls(text);
        std::string warp_s, op_s, addr_s, size_s;
        if (!(ls >> warp_s))
            continue; // blank or comment-only
        if (!(ls >> op_s >> addr_s >> size_s))
            throw std::runtime_error("trace line " + std::to_string(lineno) +
                                     ": expected 'warp op addr size'");
        TraceOp op;
        try {
            op.warp = static_cast<uint32_t>(std::stoull(warp_s, nullptr, 16));
            op.addr = std::stoull(addr_s, nullptr, 16);
            op.size = static_cast<uint32_t>(std::stoull(size_s, nullptr, 16));
        } catch (const std::exception&) {
            throw std::runtime_error("trace line " + std::to_string(lineno) +
                                     ": bad hex field");
        }
        if (op_s == "ld")
            op.kind = OpKind::Load;
        else if (op_s == "st")
            op.kind = OpKind::Store;
        else if (op_s == "alu")
            op.kind = OpKind::Alu;
        else
            throw std::runtime_error("trace line " + std::to_string(lineno) +
                                     ": unknown op '" + op_s + "'");
        ops.push_back(op);
    }
    return ops;
}

const char* to_string(OpKind k) {
    switch (k) {
    case OpKind::Load: return "ld";
    case OpKind::Store: return "st";
    case OpKind::Alu: return "alu";
    }
    return "?";
}

const char* to_string(DataProfile p) {
    switch (p) {
    case DataProfile::Zeros: return "zeros";
    case DataProfile::Repeated: return "repeated";
    case DataProfile::LowDelta: return "low_delta";
    case DataProfile::Pattern: return "pattern";
    case DataProfile::Dictionary: return "dictionary";
    case DataProfile::Random: return "random";
    case DataProfile::Mixed: return "mixed";
    }
    return "?";
}

const char* to_string(AccessPattern p) {
    switch (p) {
    case AccessPattern::StreamStore: return "stream_store";
    case AccessPattern::StreamLoad: return "stream_load";
    case AccessPattern::ReadModifyWrite: return "read_modify_write";
    case AccessPattern::RandomMix: return "random_mix";
    }
    return "?";
}

std::optional<DataProfile> profile_from_string(const std::string& s) {
    for (DataProfile p : {DataProfile::Zeros, DataProfile::Repeated, DataProfile::LowDelta,
                          DataProfile::Pattern, DataProfile::Dictionary, DataProfile::Random,
                          DataProfile::Mixed})
        if (s == to_string(p))
            return p;
    return std::nullopt;
}

std::optional<AccessPattern> pattern_from_string(const std::string& s) {
    for (AccessPattern p : {AccessPattern::StreamStore, AccessPattern::StreamLoad,
                            AccessPattern::ReadModifyWrite, AccessPattern::RandomMix})
        if (s == to_string(p))
            return p;
    return std::nullopt;
}

} // namespace caba
