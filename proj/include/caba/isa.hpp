#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "caba/codec.hpp"

namespace caba {

// Micro-ISA executed by assist warps. Thirteen opcodes, 32 lanes, 64-bit
// lane registers. Memory operands address the per-instance workspace: loads
// read the input buffer (the stored line for decompression, the raw line for
// compression) and STW writes the output buffer.

enum class Opcode : uint8_t {
    MOVE,        // copy reg/imm/live-in; optional first-active-lane broadcast
    LDW,         // broadcast load: one value to every active lane
    LDC,         // per-lane element load (offset + stride * lane)
    STW,         // per-lane element store
    ADDI,        // dst = src + signed imm
    ADD,         // dst = a + b
    SUB,         // dst = a - b
    CMP_FITS,    // dst = value survives truncation to width (signed/unsigned)
    SETP,        // dst = (a == b)
    PAND_GLOBAL, // global predicate = AND over active lanes (optionally accumulate)
    SETMASK,     // set the active mask for the next instruction only
    BRA_P,       // branch on the global predicate
    EXIT,
};

enum class OperandKind : uint8_t { None, Reg, Imm, LiveIn };

struct Operand {
    OperandKind kind = OperandKind::None;
    int64_t value = 0;

    static Operand reg(int id) { return {OperandKind::Reg, id}; }
    static Operand imm(int64_t v) { return {OperandKind::Imm, v}; }
    static Operand live_in(int slot) { return {OperandKind::LiveIn, slot}; }
};

// Selector values carried in Mode::sel.
enum : uint32_t {
    // SETMASK sources
    kMaskAll = 0,
    kMaskImm = 1,      // operand a = literal lane mask
    kMaskHeader = 2,   // operand a = bit offset into the input buffer
    kMaskPred = 3,     // operand a = predicate register
    kMaskPredInv = 4,
    kMaskGpred = 5,    // all lanes when the global predicate holds, else none
    kMaskGpredInv = 6,
    // BRA_P conditions
    kBraIfGpred = 0,
    kBraIfNotGpred = 1,
    kBraAlways = 2,
    // PAND_GLOBAL
    kPandSet = 0,
    kPandAccum = 1,
    // MOVE
    kMovePlain = 0,
    kMoveFirstActive = 1, // read src at the first active lane, write ALL lanes
    // LDW/LDC source space
    kLoadFromIn = 0,
    kLoadFromOut = 1, // read back the routine's own output buffer
};

struct Mode {
    uint32_t width = 0;  // bytes, or bits when unit_bits
    uint32_t stride = 0; // same unit as width
    uint32_t sel = 0;
    bool sign_ext = false;
    bool unit_bits = false;

    uint32_t pack() const {
        return (width & 0x3F) | ((stride & 0xFF) << 6) | ((sel & 0xF) << 14) |
               (uint32_t(sign_ext) << 18) | (uint32_t(unit_bits) << 19);
    }
    static Mode unpack(uint32_t v) {
        Mode m;
        m.width = v & 0x3F;
        m.stride = (v >> 6) & 0xFF;
        m.sel = (v >> 14) & 0xF;
        m.sign_ext = (v >> 18) & 1;
        m.unit_bits = (v >> 19) & 1;
        return m;
    }
};

struct MicroOp {
    Opcode op = Opcode::EXIT;
    Operand a, b, c;

    Mode mode() const { return Mode::unpack(uint32_t(c.value)); }
};

enum class Direction : uint8_t { Decompress, Compress };
enum class Priority : uint8_t { High, Low };

struct Subroutine {
    std::string name;
    Algorithm algorithm = Algorithm::NONE;
    uint8_t encoding = 0; // BdiKind for BDI decompression, else 0
    Direction direction = Direction::Decompress;
    Priority priority = Priority::High;
    uint32_t register_requirement = 0; // max register id used + 1
    uint32_t base_mask = 0xFFFFFFFFu;  // default active lanes
    uint32_t live_in = 0;              // live-in MOVE count at entry
    std::vector<uint8_t> live_out_regs;
    std::vector<MicroOp> ops;
};

// The assist-warp store: one entry per routine, addressed by (routine id,
// instruction id).
class SubroutineLibrary {
public:
    int find(Algorithm alg, uint8_t encoding, Direction dir) const;
    const Subroutine& at(size_t id) const { return subs_.at(id); }
    size_t size() const { return subs_.size(); }
    const std::vector<Subroutine>& all() const { return subs_; }
    void add(Subroutine s) { subs_.push_back(std::move(s)); }

private:
    std::vector<Subroutine> subs_;
};

// Builds decompression routines for every encoding plus one compression
// routine per algorithm, matching the scalar codecs exactly.
SubroutineLibrary build_library(const CodecConfig& cfg);

// Structural checks; returns human-readable violations (empty = valid).
std::vector<std::string> validate(const Subroutine& s);

// One micro-op per line; stable format (see README).
std::string disassemble(const Subroutine& s);
std::string disassemble(const MicroOp& op);

// Scoreboard-facing classification.
struct OpInfo {
    std::array<int8_t, 3> reads{-1, -1, -1}; // register ids
    int8_t writes = -1;
    bool reads_gpred = false;
    bool writes_gpred = false;
    bool is_load = false;
    bool is_store = false;
};
OpInfo classify(const MicroOp& op);

} // namespace caba
