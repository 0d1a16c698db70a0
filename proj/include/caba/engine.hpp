#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "caba/isa.hpp"

namespace caba {

// Raised on malformed execution: out-of-range workspace access, bad live-in,
// stepping a finished routine, or an op budget overrun.
struct SimFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-instance buffers an assist routine works on. `in` holds the staged
// line (stored form for decompression, raw line for compression); `out`
// receives the result and must be pre-sized by the caller. Compression
// callers should size `out` to line_size + 16: a probe may spill past the
// line before the keep/reject decision.
struct AssistWorkspace {
    std::vector<uint8_t> in;
    std::vector<uint8_t> out;
    std::vector<uint64_t> live_in;
};

struct StepOutcome {
    bool exited = false;
    bool branch_taken = false;
};

// Functional 32-lane executor. Each register is 64 bits wide per lane. The
// active mask of an instruction is the pending SETMASK override (one
// instruction only) intersected with the routine's base mask.
class MicroEngine {
public:
    static constexpr uint32_t kLanes = 32;

    MicroEngine(const Subroutine& sub, AssistWorkspace& ws);

    bool done() const { return done_; }
    uint32_t pc() const { return pc_; }
    const MicroOp& current() const;
    StepOutcome step();

    uint64_t reg(uint32_t r, uint32_t lane = 0) const;
    std::vector<uint64_t> live_out() const;
    const Subroutine& routine() const { return *sub_; }

private:
    uint32_t effective_mask() const;
    uint64_t operand_value(const Operand& o, uint32_t lane) const;
    uint64_t load(bool from_out, uint64_t offset, const Mode& m) const;

    const Subroutine* sub_;
    AssistWorkspace* ws_;
    std::vector<uint64_t> regs_;
    uint32_t pc_ = 0;
    bool done_ = false;
    bool gpred_ = false;
    uint32_t override_mask_ = 0xFFFFFFFFu;
    bool has_override_ = false;
};

// Runs to completion; returns the number of ops executed. Faults if the
// routine exceeds max_ops (runaway loop guard).
size_t run_subroutine(MicroEngine& eng, size_t max_ops = 1 << 20);

} // namespace caba
