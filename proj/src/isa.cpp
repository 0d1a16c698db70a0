#include "caba/isa.hpp"

#include <cassert>
#include <iomanip>
#include <sstream>

namespace caba {
namespace {

constexpr uint32_t kLanes = 32;

uint32_t lane_mask(uint32_t n) {
    return n >= kLanes ? 0xFFFFFFFFu : ((1u << n) - 1);
}

uint32_t bursts_of(uint32_t bytes, const CodecConfig& cfg) {
    return (bytes + cfg.burst_size - 1) / cfg.burst_size;
}

uint32_t log2_exact(uint32_t v) {
    uint32_t n = 0;
    while ((1u << n) < v)
        ++n;
    return n;
}

Mode mw(uint32_t width, uint32_t stride = 0, bool sx = false, bool bits = false,
        uint32_t sel = 0) {
    Mode m;
    m.width = width;
    m.stride = stride;
    m.sign_ext = sx;
    m.unit_bits = bits;
    m.sel = sel;
    return m;
}

struct Asm {
    std::vector<MicroOp> ops;

    void raw(Opcode o, Operand a = {}, Operand b = {}, Operand c = {}) {
        ops.push_back(MicroOp{o, a, b, c});
    }
    void mop(Opcode o, Operand a, Operand b, Mode m) {
        raw(o, a, b, Operand::imm(int64_t(m.pack())));
    }

    void move(int d, Operand src) { mop(Opcode::MOVE, Operand::reg(d), src, Mode{}); }
    void move_first(int d, int s) {
        mop(Opcode::MOVE, Operand::reg(d), Operand::reg(s), mw(0, 0, false, false, kMoveFirstActive));
    }
    void ldw(int d, Operand ofs, Mode m) { mop(Opcode::LDW, Operand::reg(d), ofs, m); }
    void ldc(int d, Operand ofs, Mode m) { mop(Opcode::LDC, Operand::reg(d), ofs, m); }
    void stw(int s, Operand ofs, Mode m) { mop(Opcode::STW, Operand::reg(s), ofs, m); }
    void addi(int d, int s, int64_t v) {
        raw(Opcode::ADDI, Operand::reg(d), Operand::reg(s), Operand::imm(v));
    }
    void add(int d, int a, Operand b) { raw(Opcode::ADD, Operand::reg(d), Operand::reg(a), b); }
    void sub(int d, int a, Operand b) { raw(Opcode::SUB, Operand::reg(d), Operand::reg(a), b); }
    void cmpf(int d, int s, uint32_t width, bool sgn) {
        mop(Opcode::CMP_FITS, Operand::reg(d), Operand::reg(s), mw(width, 0, sgn));
    }
    void setp(int d, int a, Operand b) {
        raw(Opcode::SETP, Operand::reg(d), Operand::reg(a), b);
    }
    void pand(int p, bool accum = false) {
        mop(Opcode::PAND_GLOBAL, Operand::reg(p), {},
            mw(0, 0, false, false, accum ? kPandAccum : kPandSet));
    }
    void setmask_all() { mop(Opcode::SETMASK, {}, {}, mw(0, 0, false, false, kMaskAll)); }
    void setmask_imm(uint32_t mask) {
        mop(Opcode::SETMASK, Operand::imm(int64_t(mask)), {}, mw(0, 0, false, false, kMaskImm));
    }
    void setmask_hdr(Operand bit_ofs, uint32_t nbits) {
        mop(Opcode::SETMASK, bit_ofs, {}, mw(nbits, 0, false, true, kMaskHeader));
    }
    void setmask_pred(int p, bool inv = false) {
        mop(Opcode::SETMASK, Operand::reg(p), {},
            mw(0, 0, false, false, inv ? kMaskPredInv : kMaskPred));
    }
    void setmask_gpred(bool inv) {
        mop(Opcode::SETMASK, {}, {}, mw(0, 0, false, false, inv ? kMaskGpredInv : kMaskGpred));
    }
    size_t bra(uint32_t cond) {
        mop(Opcode::BRA_P, Operand::imm(-1), {}, mw(0, 0, false, false, cond));
        return ops.size() - 1;
    }
    size_t here() const { return ops.size(); }
    void patch(size_t at) { ops[at].a = Operand::imm(int64_t(ops.size())); }
    void patch_to(size_t at, size_t target) { ops[at].a = Operand::imm(int64_t(target)); }
    void exit() { raw(Opcode::EXIT); }
};

uint32_t max_register(const std::vector<MicroOp>& ops) {
    int top = -1;
    for (const auto& op : ops) {
        const OpInfo info = classify(op);
        for (int8_t r : info.reads)
            if (r > top)
                top = r;
        if (info.writes > top)
            top = info.writes;
    }
    return uint32_t(top + 1);
}

Subroutine finish(Asm&& a, std::string name, Algorithm alg, uint8_t encoding,
                  Direction dir, uint32_t base_mask, uint32_t live_in,
                  std::vector<uint8_t> live_out) {
    Subroutine s;
    s.name = std::move(name);
    s.algorithm = alg;
    s.encoding = encoding;
    s.direction = dir;
    s.priority = dir == Direction::Decompress ? Priority::High : Priority::Low;
    s.base_mask = base_mask;
    s.live_in = live_in;
    s.live_out_regs = std::move(live_out);
    s.ops = std::move(a.ops);
    s.register_requirement = max_register(s.ops);
    return s;
}

// --- decompression -------------------------------------------------------

// Stored form {0x00}: write zero to every word of the line.
Subroutine build_bdi_dec_zeros(const CodecConfig& cfg) {
    const uint32_t n = cfg.line_size / 8;
    Asm a;
    a.setmask_all();
    a.move(0, Operand::imm(0));
    a.stw(0, Operand::imm(0), mw(8, 8));
    a.exit();
    return finish(std::move(a), "bdi.zeros.dec", Algorithm::BDI,
                  uint8_t(BdiKind::Zeros), Direction::Decompress, lane_mask(n), 0, {});
}

// Stored form {0x01, value}: broadcast the 8-byte value to every word.
Subroutine build_bdi_dec_repeated(const CodecConfig& cfg) {
    const uint32_t n = cfg.line_size / 8;
    Asm a;
    a.ldw(0, Operand::imm(1), mw(8));
    a.setmask_all();
    a.stw(0, Operand::imm(0), mw(8, 8));
    a.exit();
    return finish(std::move(a), "bdi.repeated.dec", Algorithm::BDI,
                  uint8_t(BdiKind::Repeated), Direction::Decompress, lane_mask(n), 0, {});
}

// Stored form [mask bits][base][deltas]: word = (mask bit ? base : 0) + delta.
Subroutine build_bdi_dec_bxdy(BdiKind kind, const CodecConfig& cfg) {
    const BdiView v = bdi_view(kind);
    const uint32_t B = v.base_size, D = v.delta_size;
    const uint32_t n = cfg.line_size / B;
    const uint32_t mask_bytes = (n + 7) / 8;
    const uint32_t chunks = (n + kLanes - 1) / kLanes;

    Asm a;
    a.move(0, Operand::live_in(0)); // line address handoff
    a.ldw(1, Operand::imm(mask_bytes), mw(B));
    for (uint32_t k = 0; k < chunks; ++k) {
        const uint32_t lanes = std::min(kLanes, n - k * kLanes);
        a.ldc(2, Operand::imm(int64_t(mask_bytes + B + k * kLanes * D)), mw(D, D, true));
        a.setmask_hdr(Operand::imm(int64_t(k) * kLanes), lanes);
        a.add(2, 2, Operand::reg(1)); // masked: explicit-base lanes only
        a.stw(2, Operand::imm(int64_t(k) * kLanes * B), mw(B, B));
    }
    a.exit();
    return finish(std::move(a), std::string("bdi.") + to_string(kind) + ".dec",
                  Algorithm::BDI, uint8_t(kind), Direction::Decompress,
                  lane_mask(std::min(n, kLanes)), 1, {});
}

// 16-byte segments, 4-byte words, one of four patterns per segment.
Subroutine build_fpc_dec(const CodecConfig& cfg) {
    const uint32_t S = cfg.line_size / kFpcSegmentBytes;
    const uint32_t hdr = (2 * S + 7) / 8;
    const uint32_t m4 = lane_mask(4);

    Asm a;
    a.move(0, Operand::live_in(0));
    a.move(1, Operand::imm(hdr)); // payload cursor (bytes)
    for (uint32_t s = 0; s < S; ++s) {
        a.ldw(4, Operand::imm(int64_t(2) * s), mw(2, 0, false, true)); // pattern code
        // zero words
        a.setp(3, 4, Operand::imm(0));
        a.setmask_pred(3);
        a.move(2, Operand::imm(0));
        // sign-extended bytes
        a.setp(3, 4, Operand::imm(1));
        a.setmask_pred(3);
        a.ldc(2, Operand::reg(1), mw(1, 1, true));
        // sign-extended halves
        a.setp(3, 4, Operand::imm(2));
        a.setmask_pred(3);
        a.ldc(2, Operand::reg(1), mw(2, 2, true));
        // verbatim words
        a.setp(3, 4, Operand::imm(3));
        a.setmask_pred(3);
        a.ldc(2, Operand::reg(1), mw(4, 4));
        a.stw(2, Operand::imm(int64_t(s) * kFpcSegmentBytes), mw(4, 4));
        // cursor += 4 * pattern + 4 * (pattern == uncompressed)
        a.add(5, 4, Operand::reg(4));
        a.add(5, 5, Operand::reg(5));
        a.add(1, 1, Operand::reg(5));
        a.setp(3, 4, Operand::imm(3));
        a.add(3, 3, Operand::reg(3));
        a.add(3, 3, Operand::reg(3));
        a.add(1, 1, Operand::reg(3));
    }
    a.exit();
    return finish(std::move(a), "fpc.dec", Algorithm::FPC, 0, Direction::Decompress,
                  m4, 1, {});
}

// [code nibbles][dictionary][slot bytes]; slot width derived from the codes,
// slot base from the stored size.
Subroutine build_cpack_dec(const CodecConfig& cfg) {
    const uint32_t n = cfg.line_size / kCpackWordBytes;
    const uint32_t codes_bytes = n / 2;
    const uint32_t chunks = (n + kLanes - 1) / kLanes;

    Asm a;
    a.move(0, Operand::live_in(0)); // line address handoff
    a.move(1, Operand::live_in(1)); // stored size
    // Slot width: 1 iff any word uses a partial-match or zero-extend code.
    for (uint32_t k = 0; k < chunks; ++k) {
        const uint32_t lanes = std::min(kLanes, n - k * kLanes);
        a.setmask_imm(lane_mask(lanes));
        a.ldc(2, Operand::imm(int64_t(4) * k * kLanes), mw(2, 4, false, true));
        a.setp(4, 2, Operand::imm(2));
        a.setp(5, 2, Operand::imm(3));
        a.add(6, 4, Operand::reg(5));
        a.setp(6, 6, Operand::imm(0));
        a.setmask_imm(lane_mask(lanes));
        a.pand(6, k > 0);
    }
    a.move(8, Operand::imm(0));
    a.setmask_gpred(true);
    a.move(8, Operand::imm(1)); // slot width
    // slot base = stored size - n * slot_width
    a.add(15, 8, Operand::reg(8));
    for (uint32_t i = 1; i < log2_exact(n); ++i)
        a.add(15, 15, Operand::reg(15));
    a.sub(9, 1, Operand::reg(15));
    if (chunks > 1) {
        // per-chunk slot-base advance = 32 * slot_width
        a.add(15, 8, Operand::reg(8));
        for (uint32_t i = 1; i < log2_exact(kLanes); ++i)
            a.add(15, 15, Operand::reg(15));
    }
    for (uint32_t k = 0; k < chunks; ++k) {
        const uint32_t lanes = std::min(kLanes, n - k * kLanes);
        const uint32_t m = lane_mask(lanes);
        a.setmask_imm(m);
        a.ldc(2, Operand::imm(int64_t(4) * k * kLanes), mw(2, 4, false, true)); // types
        a.setmask_imm(m);
        a.ldc(3, Operand::imm(int64_t(4) * k * kLanes + 2), mw(2, 4, false, true)); // indices
        a.setp(4, 2, Operand::imm(2));        // partial match
        a.setp(5, 2, Operand::imm(3));        // zero extend
        a.add(6, 4, Operand::reg(5));         // consumes a slot byte
        a.setp(7, 2, Operand::imm(1));
        a.add(7, 7, Operand::reg(4));         // reads the dictionary
        a.add(10, 3, Operand::reg(3));
        a.add(10, 10, Operand::reg(10));
        a.addi(10, 10, codes_bytes);          // dictionary byte offset
        a.setmask_pred(7);
        a.ldc(11, Operand::reg(10), mw(4, 0)); // dictionary word
        a.setmask_pred(7);
        a.ldc(14, Operand::reg(10), mw(1, 0)); // its low byte
        a.setmask_pred(6);
        a.ldc(12, Operand::reg(9), mw(1, 1)); // slot byte
        a.move(13, Operand::imm(0));
        a.setmask_pred(7);
        a.move(13, Operand::reg(11));
        a.setmask_pred(4);
        a.sub(13, 13, Operand::reg(14));
        a.setmask_pred(4);
        a.add(13, 13, Operand::reg(12));
        a.setmask_pred(5);
        a.move(13, Operand::reg(12));
        a.setmask_imm(m);
        a.stw(13, Operand::imm(int64_t(k) * kLanes * kCpackWordBytes), mw(4, 4));
        if (k + 1 < chunks)
            a.add(9, 9, Operand::reg(15));
    }
    a.exit();
    return finish(std::move(a), "cpack.dec", Algorithm::CPACK, 0, Direction::Decompress,
                  0xFFFFFFFFu, 2, {});
}

// --- compression ---------------------------------------------------------

// Registers shared by the BDI probe blocks:
//   r0 addr, r1 words, r2 base, r3 delta, r4/r5/r6 predicates,
//   r7 encoding out, r8 size out, r9 scratch, r10 header bit.
void bdi_emit_none(Asm& a, const CodecConfig& cfg) {
    a.move(7, Operand::imm(0));
    a.move(8, Operand::imm(int64_t(cfg.line_size)));
    a.exit();
}

Subroutine build_bdi_comp(const CodecConfig& cfg) {
    const uint32_t L = cfg.line_size;
    Asm a;
    a.move(0, Operand::live_in(0));

    // all-zero probe (4-byte view)
    {
        const uint32_t n4 = L / 4;
        const uint32_t chunks = (n4 + kLanes - 1) / kLanes;
        for (uint32_t k = 0; k < chunks; ++k) {
            const uint32_t m = lane_mask(std::min(kLanes, n4 - k * kLanes));
            a.setmask_imm(m);
            a.ldc(1, Operand::imm(int64_t(4) * k * kLanes), mw(4, 4));
            a.setp(4, 1, Operand::imm(0));
            a.setmask_imm(m);
            a.pand(4, k > 0);
        }
        const size_t skip = a.bra(kBraIfNotGpred);
        if (bursts_of(1, cfg) < bursts_of(L, cfg)) {
            a.move(9, Operand::imm(0));
            a.setmask_imm(1);
            a.stw(9, Operand::imm(0), mw(1));
            a.move(7, Operand::imm(encoding_id(Algorithm::BDI, uint8_t(BdiKind::Zeros))));
            a.move(8, Operand::imm(1));
            a.exit();
        } else {
            bdi_emit_none(a, cfg); // first fit stops at a non-winning probe
        }
        a.patch(skip);
    }

    // repeated-value probe (8-byte view)
    {
        const uint32_t n8 = L / 8;
        const uint32_t m = lane_mask(n8);
        a.ldw(2, Operand::imm(0), mw(8));
        a.setmask_imm(m);
        a.ldc(1, Operand::imm(0), mw(8, 8));
        a.setp(4, 1, Operand::reg(2));
        a.setmask_imm(m);
        a.pand(4);
        const size_t skip = a.bra(kBraIfNotGpred);
        if (bursts_of(9, cfg) < bursts_of(L, cfg)) {
            a.move(9, Operand::imm(1));
            a.setmask_imm(1);
            a.stw(9, Operand::imm(0), mw(1));
            a.setmask_imm(1);
            a.stw(2, Operand::imm(1), mw(8));
            a.move(7, Operand::imm(encoding_id(Algorithm::BDI, uint8_t(BdiKind::Repeated))));
            a.move(8, Operand::imm(9));
            a.exit();
        } else {
            bdi_emit_none(a, cfg); // first fit stops at a non-winning probe
        }
        a.patch(skip);
    }

    // base+delta probes, narrowest-delta-first order
    for (BdiKind kind : kBdiProbeOrder) {
        if (kind == BdiKind::Zeros || kind == BdiKind::Repeated)
            continue;
        const BdiView v = bdi_view(kind);
        const uint32_t B = v.base_size, D = v.delta_size;
        const uint32_t n = L / B;
        const uint32_t mask_bytes = (n + 7) / 8;
        const uint32_t total = mask_bytes + B + n * D;
        const uint32_t chunks = (n + kLanes - 1) / kLanes;

        a.ldw(2, Operand::imm(0), mw(B, 0, true));
        for (uint32_t k = 0; k < chunks; ++k) {
            const uint32_t m = lane_mask(std::min(kLanes, n - k * kLanes));
            a.setmask_imm(m);
            a.ldc(1, Operand::imm(int64_t(k) * kLanes * B), mw(B, B, true));
            a.cmpf(4, 1, D, true);             // delta from zero fits
            a.sub(3, 1, Operand::reg(2));
            a.cmpf(5, 3, D, true);             // delta from base fits
            a.add(6, 4, Operand::reg(5));
            a.setmask_imm(m);
            a.pand(6, k > 0);
        }
        const size_t skip = a.bra(kBraIfNotGpred);
        if (bursts_of(total, cfg) < bursts_of(L, cfg)) {
            for (uint32_t k = 0; k < chunks; ++k) {
                const uint32_t m = lane_mask(std::min(kLanes, n - k * kLanes));
                a.setmask_imm(m);
                a.ldc(1, Operand::imm(int64_t(k) * kLanes * B), mw(B, B, true));
                a.cmpf(4, 1, D, true);
                a.setp(10, 4, Operand::imm(0)); // 1 = needs the explicit base
                a.setmask_imm(m);
                a.stw(10, Operand::imm(int64_t(k) * kLanes), mw(1, 1, false, true));
                a.sub(3, 1, Operand::reg(2));
                a.setmask_pred(4);
                a.move(3, Operand::reg(1));    // zero-base lanes keep the word
                a.setmask_imm(m);
                a.stw(3, Operand::imm(int64_t(mask_bytes + B + k * kLanes * D)), mw(D, D));
            }
            a.setmask_imm(1);
            a.stw(2, Operand::imm(mask_bytes), mw(B));
            a.move(7, Operand::imm(encoding_id(Algorithm::BDI, uint8_t(kind))));
            a.move(8, Operand::imm(total));
            a.exit();
        } else {
            bdi_emit_none(a, cfg);
        }
        a.patch(skip);
    }
    bdi_emit_none(a, cfg);
    return finish(std::move(a), "bdi.comp", Algorithm::BDI, 0, Direction::Compress,
                  0xFFFFFFFFu, 1, {7, 8});
}

// r0 addr, r1 output cursor, r2 words, r3 predicate, r4 scratch,
// r7 encoding out, r8 size out.
Subroutine build_fpc_comp(const CodecConfig& cfg) {
    const uint32_t L = cfg.line_size;
    const uint32_t S = L / kFpcSegmentBytes;
    const uint32_t hdr = (2 * S + 7) / 8;
    const uint32_t m4 = lane_mask(4);

    Asm a;
    a.move(0, Operand::live_in(0));
    a.move(1, Operand::imm(hdr));
    for (uint32_t s = 0; s < S; ++s) {
        a.setmask_imm(m4);
        a.ldc(2, Operand::imm(int64_t(s) * kFpcSegmentBytes), mw(4, 4, true));
        a.setp(3, 2, Operand::imm(0));
        a.setmask_imm(m4);
        a.pand(3);
        const size_t to_next_zero = a.bra(kBraIfGpred); // zero code is already 0
        a.cmpf(3, 2, 1, true);
        a.setmask_imm(m4);
        a.pand(3);
        const size_t to_b1 = a.bra(kBraIfGpred);
        a.cmpf(3, 2, 2, true);
        a.setmask_imm(m4);
        a.pand(3);
        const size_t to_b2 = a.bra(kBraIfGpred);
        // verbatim words
        a.setmask_imm(m4);
        a.stw(2, Operand::reg(1), mw(4, 4));
        a.addi(1, 1, 16);
        a.move(4, Operand::imm(3));
        a.setmask_imm(1);
        a.stw(4, Operand::imm(int64_t(2) * s), mw(2, 0, false, true));
        const size_t to_next_u = a.bra(kBraAlways);
        // sign-extended bytes
        a.patch(to_b1);
        a.setmask_imm(m4);
        a.stw(2, Operand::reg(1), mw(1, 1));
        a.addi(1, 1, 4);
        a.move(4, Operand::imm(1));
        a.setmask_imm(1);
        a.stw(4, Operand::imm(int64_t(2) * s), mw(2, 0, false, true));
        const size_t to_next_b1 = a.bra(kBraAlways);
        // sign-extended halves
        a.patch(to_b2);
        a.setmask_imm(m4);
        a.stw(2, Operand::reg(1), mw(2, 2));
        a.addi(1, 1, 8);
        a.move(4, Operand::imm(2));
        a.setmask_imm(1);
        a.stw(4, Operand::imm(int64_t(2) * s), mw(2, 0, false, true));
        a.patch(to_next_zero);
        a.patch(to_next_u);
        a.patch(to_next_b1);
    }
    // keep only when it saves a burst
    a.move(4, Operand::imm(int64_t(L) - cfg.burst_size));
    a.sub(4, 4, Operand::reg(1));
    a.cmpf(3, 4, 4, false);
    a.setmask_imm(m4);
    a.pand(3);
    const size_t reject = a.bra(kBraIfNotGpred);
    a.move(7, Operand::imm(encoding_id(Algorithm::FPC, 0)));
    a.move(8, Operand::reg(1));
    a.exit();
    a.patch(reject);
    a.move(7, Operand::imm(0));
    a.move(8, Operand::imm(int64_t(L)));
    a.exit();
    return finish(std::move(a), "fpc.comp", Algorithm::FPC, 0, Direction::Compress,
                  m4, 1, {7, 8});
}

// r0 addr, r1 words, r2 low bytes, r3 upper bytes, r4 covered, r5/r6/r12
// predicates, r9 dictionary value, r10 type, r11 index, r13 scratch,
// r14 entry count, r15 upper bytes of the entry; r7/r8 outputs.
Subroutine build_cpack_comp(const CodecConfig& cfg) {
    const uint32_t L = cfg.line_size;
    const uint32_t n = L / kCpackWordBytes;
    assert(n <= kLanes);
    const uint32_t codes_bytes = n / 2;
    const uint32_t M = lane_mask(n);

    Asm a;
    a.move(0, Operand::live_in(0));
    a.setmask_imm(M);
    a.ldc(1, Operand::imm(0), mw(4, 4));
    a.setmask_imm(M);
    a.ldc(2, Operand::imm(0), mw(1, 4));
    a.setmask_imm(M);
    a.ldc(3, Operand::imm(1), mw(3, 4));
    a.move(10, Operand::imm(0));
    a.move(11, Operand::imm(0));
    a.setp(4, 1, Operand::imm(0)); // zero words start covered
    a.cmpf(5, 1, 1, false);
    a.setp(12, 1, Operand::imm(0));
    a.sub(5, 5, Operand::reg(12)); // fits one byte and is not zero
    a.setmask_pred(5);
    a.move(10, Operand::imm(int64_t(CpackCode::ZeroExtend)));
    a.add(4, 4, Operand::reg(5));
    a.move(14, Operand::imm(0));

    std::vector<size_t> done_branches;
    for (uint32_t j = 0; j < kCpackMaxDict; ++j) {
        a.setmask_imm(M);
        a.pand(4);
        done_branches.push_back(a.bra(kBraIfGpred));
        a.setp(6, 4, Operand::imm(0)); // still uncovered
        a.setmask_pred(6);
        a.move_first(9, 1); // next dictionary entry = first uncovered word
        a.setmask_imm(1);
        a.stw(9, Operand::imm(int64_t(codes_bytes + 4 * j)), mw(4));
        a.addi(14, 14, 1);
        a.move(12, Operand::imm(0));
        a.setmask_pred(6);
        a.setp(12, 1, Operand::reg(9)); // full matches
        a.setmask_pred(12);
        a.move(10, Operand::imm(int64_t(CpackCode::FullMatch)));
        a.setmask_pred(12);
        a.move(11, Operand::imm(int64_t(j)));
        a.add(4, 4, Operand::reg(12));
        a.ldw(15, Operand::imm(int64_t(codes_bytes + 4 * j + 1)),
              mw(3, 0, false, false, kLoadFromOut));
        a.setp(6, 4, Operand::imm(0));
        a.move(12, Operand::imm(0));
        a.setmask_pred(6);
        a.setp(12, 3, Operand::reg(15)); // upper-byte matches
        a.setmask_pred(12);
        a.move(10, Operand::imm(int64_t(CpackCode::PartialMatch)));
        a.setmask_pred(12);
        a.move(11, Operand::imm(int64_t(j)));
        a.add(4, 4, Operand::reg(12));
    }
    a.setmask_imm(M);
    a.pand(4);
    const size_t dict_overflow = a.bra(kBraIfNotGpred);
    for (size_t at : done_branches)
        a.patch(at);
    // slot width: 1 iff any partial-match or zero-extend code
    a.setp(12, 10, Operand::imm(int64_t(CpackCode::PartialMatch)));
    a.setp(6, 10, Operand::imm(int64_t(CpackCode::ZeroExtend)));
    a.add(12, 12, Operand::reg(6));
    a.setp(6, 12, Operand::imm(0));
    a.setmask_imm(M);
    a.pand(6);
    a.move(13, Operand::imm(0));
    a.setmask_gpred(true);
    a.move(13, Operand::imm(1));
    // size = codes + 4 * entries + n * slot_width
    a.add(12, 14, Operand::reg(14));
    a.add(12, 12, Operand::reg(12));
    for (uint32_t i = 0; i < log2_exact(n); ++i)
        a.add(13, 13, Operand::reg(13));
    a.move(8, Operand::imm(int64_t(codes_bytes)));
    a.add(8, 8, Operand::reg(12));
    a.add(8, 8, Operand::reg(13));
    a.move(13, Operand::imm(int64_t(L) - cfg.burst_size));
    a.sub(13, 13, Operand::reg(8));
    a.cmpf(12, 13, 4, false);
    a.setmask_imm(M);
    a.pand(12);
    const size_t reject = a.bra(kBraIfNotGpred);
    a.setmask_imm(M);
    a.stw(10, Operand::imm(0), mw(2, 4, false, true)); // type nibbles
    a.setmask_imm(M);
    a.stw(11, Operand::imm(2), mw(2, 4, false, true)); // index nibbles
    a.add(12, 14, Operand::reg(14));
    a.add(12, 12, Operand::reg(12));
    a.move(13, Operand::imm(int64_t(codes_bytes)));
    a.add(13, 13, Operand::reg(12)); // slot base
    a.setp(12, 10, Operand::imm(int64_t(CpackCode::PartialMatch)));
    a.setp(6, 10, Operand::imm(int64_t(CpackCode::ZeroExtend)));
    a.add(12, 12, Operand::reg(6));
    a.setmask_pred(12);
    a.stw(2, Operand::reg(13), mw(1, 1)); // slot bytes; fillers stay zero
    a.move(7, Operand::imm(encoding_id(Algorithm::CPACK, 0)));
    a.exit();
    a.patch(dict_overflow);
    a.patch(reject);
    a.move(7, Operand::imm(0));
    a.move(8, Operand::imm(int64_t(L)));
    a.exit();
    return finish(std::move(a), "cpack.comp", Algorithm::CPACK, 0, Direction::Compress,
                  M, 1, {7, 8});
}

} // namespace

int SubroutineLibrary::find(Algorithm alg, uint8_t encoding, Direction dir) const {
    for (size_t i = 0; i < subs_.size(); ++i) {
        const Subroutine& s = subs_[i];
        if (s.algorithm == alg && s.direction == dir &&
            (dir == Direction::Compress || s.encoding == encoding))
            return int(i);
    }
    return -1;
}

SubroutineLibrary build_library(const CodecConfig& cfg) {
    SubroutineLibrary lib;
    lib.add(build_bdi_dec_zeros(cfg));
    lib.add(build_bdi_dec_repeated(cfg));
    for (BdiKind kind : {BdiKind::B8D1, BdiKind::B8D2, BdiKind::B8D4, BdiKind::B4D1,
                         BdiKind::B4D2, BdiKind::B2D1})
        lib.add(build_bdi_dec_bxdy(kind, cfg));
    lib.add(build_fpc_dec(cfg));
    lib.add(build_cpack_dec(cfg));
    lib.add(build_bdi_comp(cfg));
    lib.add(build_fpc_comp(cfg));
    if (cfg.line_size / kCpackWordBytes <= kLanes)
        lib.add(build_cpack_comp(cfg));
    return lib;
}

OpInfo classify(const MicroOp& op) {
    OpInfo info;
    int nr = 0;
    auto read = [&](const Operand& o) {
        if (o.kind == OperandKind::Reg)
            info.reads[nr++] = int8_t(o.value);
    };
    auto write = [&](const Operand& o) {
        assert(o.kind == OperandKind::Reg);
        info.writes = int8_t(o.value);
    };
    switch (op.op) {
    case Opcode::MOVE:
        write(op.a);
        read(op.b);
        break;
    case Opcode::LDW:
    case Opcode::LDC:
        write(op.a);
        read(op.b);
        info.is_load = true;
        break;
    case Opcode::STW:
        read(op.a);
        read(op.b);
        info.is_store = true;
        break;
    case Opcode::ADDI:
    case Opcode::CMP_FITS:
        write(op.a);
        read(op.b);
        break;
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::SETP:
        write(op.a);
        read(op.b);
        read(op.c);
        break;
    case Opcode::PAND_GLOBAL:
        read(op.a);
        info.writes_gpred = true;
        info.reads_gpred = op.mode().sel == kPandAccum;
        break;
    case Opcode::SETMASK: {
        const uint32_t sel = op.mode().sel;
        if (sel == kMaskPred || sel == kMaskPredInv || sel == kMaskHeader)
            read(op.a);
        if (sel == kMaskGpred || sel == kMaskGpredInv)
            info.reads_gpred = true;
        break;
    }
    case Opcode::BRA_P:
        info.reads_gpred = op.mode().sel != kBraAlways;
        break;
    case Opcode::EXIT:
        break;
    }
    return info;
}

std::vector<std::string> validate(const Subroutine& s) {
    std::vector<std::string> out;
    if (s.ops.empty()) {
        out.push_back("empty routine");
        return out;
    }
    if (s.ops.back().op != Opcode::EXIT)
        out.push_back("last instruction is not exit");
    const uint32_t need = max_register(s.ops);
    if (s.register_requirement != need)
        out.push_back("register requirement " + std::to_string(s.register_requirement) +
                      " does not match the " + std::to_string(need) + " registers used");
    for (size_t i = 0; i < s.ops.size(); ++i) {
        const MicroOp& op = s.ops[i];
        if (op.op == Opcode::BRA_P) {
            const int64_t t = op.a.value;
            if (op.a.kind != OperandKind::Imm || t < 0 || size_t(t) >= s.ops.size())
                out.push_back("instruction " + std::to_string(i) + ": branch target out of range");
        }
        for (const Operand* o : {&op.a, &op.b, &op.c}) {
            if (o->kind == OperandKind::LiveIn) {
                if (op.op != Opcode::MOVE)
                    out.push_back("instruction " + std::to_string(i) +
                                  ": live-in outside a move");
                else if (o->value < 0 || uint64_t(o->value) >= s.live_in)
                    out.push_back("instruction " + std::to_string(i) +
                                  ": live-in slot out of range");
            }
        }
        const OpInfo info = classify(op);
        auto check_reg = [&](int r) {
            if (r >= 0 && uint32_t(r) >= s.register_requirement)
                out.push_back("instruction " + std::to_string(i) + ": register r" +
                              std::to_string(r) + " above the declared requirement");
        };
        for (int8_t r : info.reads)
            check_reg(r);
        check_reg(info.writes);
    }
    for (uint8_t r : s.live_out_regs)
        if (r >= s.register_requirement)
            out.push_back("live-out register r" + std::to_string(r) +
                          " above the declared requirement");
    if (s.base_mask == 0)
        out.push_back("empty base lane mask");
    return out;
}

namespace {

std::string operand_str(const Operand& o) {
    switch (o.kind) {
    case OperandKind::None: return "";
    case OperandKind::Reg: return "r" + std::to_string(o.value);
    case OperandKind::Imm: return "#" + std::to_string(o.value);
    case OperandKind::LiveIn: return "in" + std::to_string(o.value);
    }
    return "?";
}

std::string addr_str(const Operand& ofs, const Mode& m, bool store, bool from_out) {
    std::string space = (store || from_out) ? "out" : "in";
    std::string pos = ofs.kind == OperandKind::Reg ? "r" + std::to_string(ofs.value)
                                                   : std::to_string(ofs.value);
    std::string txt = "[" + space + "+" + pos + "], w" + std::to_string(m.width);
    if (m.stride)
        txt += " s" + std::to_string(m.stride);
    if (m.unit_bits)
        txt += " bits";
    if (m.sign_ext)
        txt += " sx";
    return txt;
}

} // namespace

std::string disassemble(const MicroOp& op) {
    const Mode m = op.mode();
    std::ostringstream os;
    os << std::left;
    auto mnem = [&](const char* s) { os << std::setw(8) << s; };
    switch (op.op) {
    case Opcode::MOVE:
        mnem("move");
        os << operand_str(op.a) << ", " << operand_str(op.b);
        if (m.sel == kMoveFirstActive)
            os << " first";
        break;
    case Opcode::LDW:
    case Opcode::LDC:
        mnem(op.op == Opcode::LDW ? "ldw" : "ldc");
        os << operand_str(op.a) << ", " << addr_str(op.b, m, false, m.sel == kLoadFromOut);
        break;
    case Opcode::STW:
        mnem("stw");
        os << operand_str(op.a) << ", " << addr_str(op.b, m, true, false);
        break;
    case Opcode::ADDI:
        mnem("addi");
        os << operand_str(op.a) << ", " << operand_str(op.b) << ", " << operand_str(op.c);
        break;
    case Opcode::ADD:
    case Opcode::SUB:
        mnem(op.op == Opcode::ADD ? "add" : "sub");
        os << operand_str(op.a) << ", " << operand_str(op.b) << ", " << operand_str(op.c);
        break;
    case Opcode::CMP_FITS:
        mnem("cmpf");
        os << operand_str(op.a) << ", " << operand_str(op.b) << ", "
           << (m.sign_ext ? "s" : "u") << m.width;
        break;
    case Opcode::SETP:
        mnem("setp");
        os << operand_str(op.a) << ", " << operand_str(op.b) << ", " << operand_str(op.c);
        break;
    case Opcode::PAND_GLOBAL:
        mnem(m.sel == kPandAccum ? "pand.acc" : "pand");
        os << operand_str(op.a);
        break;
    case Opcode::SETMASK:
        mnem("setmask");
        switch (m.sel) {
        case kMaskAll: os << "all"; break;
        case kMaskImm: {
            std::ostringstream hex;
            hex << "#0x" << std::hex << std::setw(8) << std::setfill('0')
                << uint32_t(op.a.value);
            os << hex.str();
            break;
        }
        case kMaskHeader:
            os << "hdr " << (op.a.kind == OperandKind::Reg ? operand_str(op.a)
                                                           : std::to_string(op.a.value))
               << ", n" << m.width;
            break;
        case kMaskPred: os << "p" << op.a.value; break;
        case kMaskPredInv: os << "!p" << op.a.value; break;
        case kMaskGpred: os << "gp"; break;
        case kMaskGpredInv: os << "!gp"; break;
        default: os << "?"; break;
        }
        break;
    case Opcode::BRA_P:
        mnem("bra");
        os << op.a.value;
        if (m.sel == kBraIfGpred)
            os << " if gp";
        else if (m.sel == kBraIfNotGpred)
            os << " if !gp";
        break;
    case Opcode::EXIT:
        os << "exit";
        break;
    }
    return os.str();
}

std::string disassemble(const Subroutine& s) {
    std::ostringstream os;
    os << "; " << s.name << ": " << s.ops.size() << " ops, " << s.register_requirement
       << " regs, mask 0x" << std::hex << std::setw(8) << std::setfill('0') << s.base_mask
       << std::dec << std::setfill(' ') << ", live-in " << s.live_in << "\n";
    for (size_t i = 0; i < s.ops.size(); ++i) {
        os << std::setw(4) << std::setfill('0') << i << std::setfill(' ') << "  "
           << disassemble(s.ops[i]) << "\n";
    }
    return os.str();
}

} // namespace caba
