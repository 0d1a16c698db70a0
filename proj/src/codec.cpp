#include "caba/codec.hpp"

#include <algorithm>
#include <array>
#include <cassert>

#include "caba/bits.hpp"

namespace caba {

namespace {

void check_line(std::span<const uint8_t> line, const CodecConfig& cfg) {
    if (line.size() != cfg.line_size)
        throw SizeOutOfRange("line buffer does not match configured line_size");
    if (cfg.line_size == 0 || cfg.burst_size == 0 || cfg.line_size % cfg.burst_size != 0)
        throw SizeOutOfRange("line_size must be a nonzero multiple of burst_size");
}

void check_stored(const CompressedLine& c, const CodecConfig& cfg) {
    if (c.line_size != cfg.line_size)
        throw SizeOutOfRange("stored line was produced for a different line_size");
    if (c.data.empty() || c.data.size() > cfg.line_size)
        throw SizeOutOfRange("stored size out of range");
}

// A line only earns its compressed form if it saves at least one burst.
CompressedLine filter_bursts(CompressedLine&& c, std::span<const uint8_t> line,
                             const CodecConfig& cfg) {
    if (c.algorithm == Algorithm::NONE)
        return store_raw(line, cfg);
    if (c.total_size() > cfg.line_size || // can exceed the line before filtering
        burst_count(c.total_size(), cfg) >= burst_count(cfg.line_size, cfg))
        return store_raw(line, cfg);
    return std::move(c);
}

} // namespace

uint8_t encoding_id(Algorithm alg, uint8_t encoding) {
    return uint8_t((uint8_t(alg) << 4) | (encoding & 0x0F));
}

Algorithm encoding_id_algorithm(uint8_t id) {
    switch (id >> 4) {
    case 1: return Algorithm::BDI;
    case 2: return Algorithm::FPC;
    case 3: return Algorithm::CPACK;
    default: return Algorithm::NONE;
    }
}

uint8_t encoding_id_detail(uint8_t id) { return id & 0x0F; }

uint32_t burst_count(size_t total_size, const CodecConfig& cfg) {
    if (total_size == 0 || total_size > cfg.line_size)
        throw SizeOutOfRange("total_size must be in 1..line_size");
    return uint32_t((total_size + cfg.burst_size - 1) / cfg.burst_size);
}

BdiView bdi_view(BdiKind kind) {
    switch (kind) {
    case BdiKind::B8D1: return {8, 1};
    case BdiKind::B8D2: return {8, 2};
    case BdiKind::B8D4: return {8, 4};
    case BdiKind::B4D1: return {4, 1};
    case BdiKind::B4D2: return {4, 2};
    case BdiKind::B2D1: return {2, 1};
    default: throw MalformedHeader("BDI kind has no base/delta view");
    }
}

CompressedLine store_raw(std::span<const uint8_t> line, const CodecConfig& cfg) {
    check_line(line, cfg);
    CompressedLine c;
    c.algorithm = Algorithm::NONE;
    c.encoding = 0;
    c.line_size = cfg.line_size;
    c.header_len = 0;
    c.data.assign(line.begin(), line.end());
    return c;
}

// ---------------------------------------------------------------------------
// BDI

namespace {

bool try_bdi_kind(BdiKind kind, std::span<const uint8_t> line, const CodecConfig& cfg,
                  CompressedLine& out) {
    out = CompressedLine{};
    out.algorithm = Algorithm::BDI;
    out.encoding = uint8_t(kind);
    out.line_size = cfg.line_size;

    if (kind == BdiKind::Zeros) {
        if (!std::all_of(line.begin(), line.end(), [](uint8_t b) { return b == 0; }))
            return false;
        out.header_len = 1;
        out.data = {uint8_t(BdiKind::Zeros)};
        return true;
    }
    if (kind == BdiKind::Repeated) {
        const uint64_t v = load_le(line, 0, 8);
        for (size_t o = 8; o < line.size(); o += 8)
            if (load_le(line, o, 8) != v)
                return false;
        out.header_len = 1;
        out.data.resize(9);
        out.data[0] = uint8_t(BdiKind::Repeated);
        store_le(out.data, 1, 8, v);
        return true;
    }

    const BdiView view = bdi_view(kind);
    const uint32_t n = cfg.line_size / view.base_size;
    const uint32_t mask_bytes = (n + 7) / 8;
    // The first word of the line is always the explicit base; the second
    // base is the implicit zero, preferred whenever the word is narrow.
    const int64_t base = sign_extend(load_le(line, 0, view.base_size), view.base_size);

    out.header_len = mask_bytes;
    out.data.assign(mask_bytes + view.base_size + size_t(n) * view.delta_size, 0);
    store_le(out.data, mask_bytes, view.base_size, uint64_t(base));

    for (uint32_t i = 0; i < n; ++i) {
        const int64_t w =
            sign_extend(load_le(line, size_t(i) * view.base_size, view.base_size),
                        view.base_size);
        int64_t delta;
        bool explicit_base;
        if (fits_signed(uint64_t(w), view.delta_size)) {
            delta = w;
            explicit_base = false;
        } else if (fits_signed(uint64_t(w - base), view.delta_size)) {
            delta = w - base;
            explicit_base = true;
        } else {
            return false;
        }
        store_le(out.data, mask_bytes + view.base_size + size_t(i) * view.delta_size,
                 view.delta_size, uint64_t(delta));
        store_bits(out.data, i, 1, explicit_base ? 1 : 0);
    }
    return true;
}

} // namespace

CompressedLine bdi_compress(std::span<const uint8_t> line, const CodecConfig& cfg) {
    check_line(line, cfg);
    CompressedLine c;
    for (BdiKind kind : kBdiProbeOrder)
        if (try_bdi_kind(kind, line, cfg, c))
            return filter_bursts(std::move(c), line, cfg);
    return store_raw(line, cfg);
}

std::vector<uint8_t> bdi_decompress(const CompressedLine& c, const CodecConfig& cfg) {
    check_stored(c, cfg);
    if (c.algorithm != Algorithm::BDI || c.encoding > uint8_t(BdiKind::B2D1))
        throw MalformedHeader("not a BDI encoding");
    const BdiKind kind = BdiKind(c.encoding);
    std::vector<uint8_t> line(cfg.line_size, 0);

    if (kind == BdiKind::Zeros) {
        if (c.data.size() != 1)
            throw MalformedHeader("bad size for Zeros line");
        return line;
    }
    if (kind == BdiKind::Repeated) {
        if (c.data.size() != 9)
            throw MalformedHeader("bad size for Repeated line");
        const uint64_t v = load_le(c.data, 1, 8);
        for (size_t o = 0; o < line.size(); o += 8)
            store_le(line, o, 8, v);
        return line;
    }

    const BdiView view = bdi_view(kind);
    const uint32_t n = cfg.line_size / view.base_size;
    const uint32_t mask_bytes = (n + 7) / 8;
    if (c.data.size() != mask_bytes + view.base_size + size_t(n) * view.delta_size)
        throw MalformedHeader("bad size for base-delta line");
    const int64_t base =
        sign_extend(load_le(c.data, mask_bytes, view.base_size), view.base_size);
    for (uint32_t i = 0; i < n; ++i) {
        const int64_t delta = sign_extend(
            load_le(c.data, mask_bytes + view.base_size + size_t(i) * view.delta_size,
                    view.delta_size),
            view.delta_size);
        const bool explicit_base = load_bits(c.data, i, 1) != 0;
        const int64_t w = (explicit_base ? base : 0) + delta;
        store_le(line, size_t(i) * view.base_size, view.base_size, uint64_t(w));
    }
    return line;
}

// ---------------------------------------------------------------------------
// FPC

CompressedLine fpc_compress(std::span<const uint8_t> line, const CodecConfig& cfg) {
    check_line(line, cfg);
    const uint32_t n_seg = cfg.line_size / kFpcSegmentBytes;
    const uint32_t words_per_seg = kFpcSegmentBytes / kFpcWordBytes;
    const uint32_t hdr = (n_seg * 2 + 7) / 8;

    CompressedLine c;
    c.algorithm = Algorithm::FPC;
    c.encoding = 0;
    c.line_size = cfg.line_size;
    c.header_len = hdr;
    c.data.assign(hdr, 0);

    for (uint32_t s = 0; s < n_seg; ++s) {
        std::array<int64_t, 8> w{};
        bool zeros = true, bytes = true, halves = true;
        for (uint32_t k = 0; k < words_per_seg; ++k) {
            const size_t off = size_t(s) * kFpcSegmentBytes + size_t(k) * kFpcWordBytes;
            w[k] = sign_extend(load_le(line, off, kFpcWordBytes), kFpcWordBytes);
            zeros &= w[k] == 0;
            bytes &= fits_signed(uint64_t(w[k]), 1);
            halves &= fits_signed(uint64_t(w[k]), 2);
        }
        FpcPattern p = FpcPattern::Uncompressed;
        uint32_t width = kFpcWordBytes;
        if (zeros) {
            p = FpcPattern::ZeroWords;
            width = 0;
        } else if (bytes) {
            p = FpcPattern::SignExtByte;
            width = 1;
        } else if (halves) {
            p = FpcPattern::SignExtHalf;
            width = 2;
        }
        store_bits(c.data, size_t(s) * 2, 2, uint8_t(p));
        for (uint32_t k = 0; width != 0 && k < words_per_seg; ++k) {
            const size_t at = c.data.size();
            c.data.resize(at + width);
            store_le(c.data, at, width, uint64_t(w[k]));
        }
    }
    return filter_bursts(std::move(c), line, cfg);
}

std::vector<uint8_t> fpc_decompress(const CompressedLine& c, const CodecConfig& cfg) {
    check_stored(c, cfg);
    if (c.algorithm != Algorithm::FPC)
        throw MalformedHeader("not an FPC line");
    const uint32_t n_seg = cfg.line_size / kFpcSegmentBytes;
    const uint32_t words_per_seg = kFpcSegmentBytes / kFpcWordBytes;
    const uint32_t hdr = (n_seg * 2 + 7) / 8;
    if (c.data.size() < hdr || c.header_len != hdr)
        throw MalformedHeader("FPC header truncated");

    std::vector<uint8_t> line(cfg.line_size, 0);
    size_t off = hdr;
    for (uint32_t s = 0; s < n_seg; ++s) {
        const auto p = FpcPattern(load_bits(c.data, size_t(s) * 2, 2));
        const uint32_t width = p == FpcPattern::ZeroWords      ? 0
                               : p == FpcPattern::SignExtByte  ? 1
                               : p == FpcPattern::SignExtHalf ? 2
                                                               : kFpcWordBytes;
        for (uint32_t k = 0; k < words_per_seg; ++k) {
            const size_t dst = size_t(s) * kFpcSegmentBytes + size_t(k) * kFpcWordBytes;
            int64_t v = 0;
            if (width != 0) {
                if (off + width > c.data.size())
                    throw MalformedHeader("FPC payload truncated");
                v = sign_extend(load_le(c.data, off, width), width);
                off += width;
            }
            store_le(line, dst, kFpcWordBytes, uint64_t(v));
        }
    }
    if (off != c.data.size())
        throw MalformedHeader("FPC payload has trailing bytes");
    return line;
}

// ---------------------------------------------------------------------------
// C-Pack

CompressedLine cpack_compress(std::span<const uint8_t> line, const CodecConfig& cfg) {
    check_line(line, cfg);
    const uint32_t n = cfg.line_size / kCpackWordBytes;
    const uint32_t codes_bytes = (n * 4 + 7) / 8;

    std::vector<uint32_t> dict;
    std::vector<uint8_t> type(n), index(n, 0), slot(n, 0);
    bool any_slot = false;

    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t w = uint32_t(load_le(line, size_t(i) * kCpackWordBytes, kCpackWordBytes));
        bool done = false;
        if (w == 0) {
            type[i] = uint8_t(CpackCode::Zero);
            done = true;
        }
        for (uint32_t j = 0; !done && j < dict.size(); ++j) {
            if (dict[j] == w) {
                type[i] = uint8_t(CpackCode::FullMatch);
                index[i] = uint8_t(j);
                done = true;
            }
        }
        for (uint32_t j = 0; !done && j < dict.size(); ++j) {
            if ((dict[j] >> 8) == (w >> 8)) {
                type[i] = uint8_t(CpackCode::PartialMatch);
                index[i] = uint8_t(j);
                slot[i] = uint8_t(w & 0xFF);
                any_slot = true;
                done = true;
            }
        }
        if (!done && w <= 0xFF) {
            type[i] = uint8_t(CpackCode::ZeroExtend);
            slot[i] = uint8_t(w);
            any_slot = true;
            done = true;
        }
        if (!done) {
            if (dict.size() >= kCpackMaxDict)
                return store_raw(line, cfg); // would need a fifth dictionary word
            dict.push_back(w);
            type[i] = uint8_t(CpackCode::FullMatch);
            index[i] = uint8_t(dict.size() - 1);
        }
    }

    CompressedLine c;
    c.algorithm = Algorithm::CPACK;
    c.encoding = 0;
    c.line_size = cfg.line_size;
    c.header_len = codes_bytes;
    // Layout: packed 4-bit codes, then the dictionary, then one fixed-width
    // slot byte per word (present only if some word needs one).
    const uint32_t slot_width = any_slot ? 1 : 0;
    c.data.assign(codes_bytes + dict.size() * kCpackWordBytes + size_t(slot_width) * n, 0);
    for (uint32_t i = 0; i < n; ++i) {
        store_bits(c.data, size_t(i) * 4, 2, type[i]);
        store_bits(c.data, size_t(i) * 4 + 2, 2, index[i]);
    }
    for (size_t j = 0; j < dict.size(); ++j)
        store_le(c.data, codes_bytes + j * kCpackWordBytes, kCpackWordBytes, dict[j]);
    if (slot_width)
        for (uint32_t i = 0; i < n; ++i)
            c.data[codes_bytes + dict.size() * kCpackWordBytes + i] = slot[i];
    return filter_bursts(std::move(c), line, cfg);
}

std::vector<uint8_t> cpack_decompress(const CompressedLine& c, const CodecConfig& cfg) {
    check_stored(c, cfg);
    if (c.algorithm != Algorithm::CPACK)
        throw MalformedHeader("not a C-Pack line");
    const uint32_t n = cfg.line_size / kCpackWordBytes;
    const uint32_t codes_bytes = (n * 4 + 7) / 8;
    if (c.data.size() < codes_bytes || c.header_len != codes_bytes)
        throw MalformedHeader("C-Pack codes truncated");

    std::vector<uint8_t> type(n), index(n);
    bool any_slot = false;
    for (uint32_t i = 0; i < n; ++i) {
        type[i] = uint8_t(load_bits(c.data, size_t(i) * 4, 2));
        index[i] = uint8_t(load_bits(c.data, size_t(i) * 4 + 2, 2));
        any_slot |= type[i] == uint8_t(CpackCode::PartialMatch) ||
                    type[i] == uint8_t(CpackCode::ZeroExtend);
    }
    const uint32_t slot_width = any_slot ? 1 : 0;
    const size_t fixed = codes_bytes + size_t(slot_width) * n;
    if (c.data.size() < fixed || (c.data.size() - fixed) % kCpackWordBytes != 0)
        throw MalformedHeader("C-Pack size inconsistent with codes");
    const size_t n_dict = (c.data.size() - fixed) / kCpackWordBytes;
    if (n_dict > kCpackMaxDict)
        throw MalformedHeader("C-Pack dictionary too large");
    const size_t slot_base = codes_bytes + n_dict * kCpackWordBytes;

    std::vector<uint8_t> line(cfg.line_size, 0);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t v = 0;
        const auto code = CpackCode(type[i]);
        if (code == CpackCode::FullMatch || code == CpackCode::PartialMatch) {
            if (index[i] >= n_dict)
                throw DictIndexOutOfRange("C-Pack code references a missing entry");
            v = uint32_t(load_le(c.data, codes_bytes + size_t(index[i]) * kCpackWordBytes,
                                 kCpackWordBytes));
        }
        if (code == CpackCode::PartialMatch)
            v = (v & ~0xFFu) | c.data[slot_base + i];
        else if (code == CpackCode::ZeroExtend)
            v = c.data[slot_base + i];
        store_le(line, size_t(i) * kCpackWordBytes, kCpackWordBytes, v);
    }
    return line;
}

// ---------------------------------------------------------------------------

std::vector<uint8_t> decompress(const CompressedLine& c, const CodecConfig& cfg) {
    switch (c.algorithm) {
    case Algorithm::BDI: return bdi_decompress(c, cfg);
    case Algorithm::FPC: return fpc_decompress(c, cfg);
    case Algorithm::CPACK: return cpack_decompress(c, cfg);
    case Algorithm::NONE:
        check_stored(c, cfg);
        if (c.data.size() != cfg.line_size)
            throw MalformedHeader("raw line with wrong size");
        return c.data;
    }
    throw MalformedHeader("unknown algorithm");
}

CompressedLine compress_with(Algorithm alg, std::span<const uint8_t> line,
                             const CodecConfig& cfg) {
    switch (alg) {
    case Algorithm::BDI: return bdi_compress(line, cfg);
    case Algorithm::FPC: return fpc_compress(line, cfg);
    case Algorithm::CPACK: return cpack_compress(line, cfg);
    case Algorithm::NONE: return store_raw(line, cfg);
    }
    throw MalformedHeader("unknown algorithm");
}

CompressedLine best_of_all(std::span<const uint8_t> line, const CodecConfig& cfg) {
    const Algorithm order[] = {Algorithm::BDI, Algorithm::CPACK, Algorithm::FPC};
    CompressedLine best = store_raw(line, cfg);
    uint32_t best_bursts = burst_count(best.total_size(), cfg);
    for (Algorithm alg : order) {
        CompressedLine c = compress_with(alg, line, cfg);
        if (c.algorithm == Algorithm::NONE)
            continue;
        const uint32_t b = burst_count(c.total_size(), cfg);
        if (b < best_bursts) { // strict: ties keep the earlier candidate
            best = std::move(c);
            best_bursts = b;
        }
    }
    return best;
}

uint32_t stored_header_len(Algorithm alg, uint8_t encoding, const CodecConfig& cfg) {
    switch (alg) {
    case Algorithm::NONE:
        return 0;
    case Algorithm::BDI: {
        const auto kind = BdiKind(encoding);
        if (kind == BdiKind::Zeros || kind == BdiKind::Repeated)
            return 1;
        const BdiView v = bdi_view(kind);
        return (cfg.line_size / v.base_size + 7) / 8;
    }
    case Algorithm::FPC:
        return (2 * (cfg.line_size / kFpcSegmentBytes) + 7) / 8;
    case Algorithm::CPACK:
        return cfg.line_size / kCpackWordBytes / 2;
    }
    throw MalformedHeader("unknown algorithm");
}

CompressedLine assemble_stored(uint8_t id, std::span<const uint8_t> out,
                               size_t total_size, std::span<const uint8_t> raw_line,
                               const CodecConfig& cfg) {
    if (id == 0)
        return store_raw(raw_line, cfg);
    const Algorithm alg = encoding_id_algorithm(id);
    const uint8_t detail = alg == Algorithm::BDI ? encoding_id_detail(id) : 0;
    if (total_size == 0 || total_size > out.size() || total_size > cfg.line_size)
        throw SizeOutOfRange("assembled line size out of range");
    CompressedLine c;
    c.algorithm = alg;
    c.encoding = detail;
    c.line_size = cfg.line_size;
    c.header_len = stored_header_len(alg, detail, cfg);
    c.data.assign(out.begin(), out.begin() + ptrdiff_t(total_size));
    return c;
}

const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::BDI: return "bdi";
    case Algorithm::FPC: return "fpc";
    case Algorithm::CPACK: return "cpack";
    case Algorithm::NONE: return "none";
    }
    return "?";
}

const char* to_string(BdiKind k) {
    switch (k) {
    case BdiKind::Zeros: return "zeros";
    case BdiKind::Repeated: return "repeated";
    case BdiKind::B8D1: return "b8d1";
    case BdiKind::B8D2: return "b8d2";
    case BdiKind::B8D4: return "b8d4";
    case BdiKind::B4D1: return "b4d1";
    case BdiKind::B4D2: return "b4d2";
    case BdiKind::B2D1: return "b2d1";
    case BdiKind::Uncompressed: return "uncompressed";
    }
    return "?";
}

} // namespace caba
