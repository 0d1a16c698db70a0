#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caba/awc.hpp"
#include "caba/metrics.hpp"
#include "caba/workload.hpp"

namespace caba {

struct PipeConfig {
    uint32_t warps_per_sm = 48;
    uint32_t warp_width = 32;
    uint32_t issue_width = 2; // one slot per scheduler, warps split by parity
    uint32_t alu_latency = 1;
    uint32_t assist_mem_latency = 4; // staging-buffer access for assist ops
};

// Outcome of handing a memory op to the backend. Accepted ops complete
// later through Pipeline::load_done (stores are buffered and need no
// completion signal).
enum class MemStall : uint8_t {
    Accepted,
    QueueFull,  // no room in the memory request queue
    BufferFull, // no store-buffer entry available
};

class MemoryBackend {
public:
    virtual ~MemoryBackend() = default;
    virtual MemStall try_load(uint32_t warp, uint64_t addr, uint32_t size, uint64_t now) = 0;
    virtual MemStall try_store(uint32_t warp, uint64_t addr, uint32_t size, uint64_t now) = 0;
};

// What each issue slot did in the most recent cycle, for cycle tracing and
// scheduler audits.
struct SlotEvent {
    bool issued = false;
    bool assist = false;
    uint32_t warp = 0;      // parent warp, or the assist's parent
    uint32_t assist_id = 0; // 0 for parent issues
    std::string text;       // e.g. "w03.ld", "aw12.stw", "stall:mem", "idle"
};

// Issue stage: per-parity greedy-then-oldest warp scheduling with
// high-priority assists ahead of parents and low-priority assists behind
// them. Parent warps run trace ops in order; loads overlap, while ALU and
// store ops wait for the warp's outstanding loads. Assist routines issue
// in order against per-register ready times and execute functionally at
// issue.
class Pipeline {
public:
    Pipeline(const PipeConfig& cfg, MemoryBackend& mem, AssistController* awc);

    void load_program(std::vector<TraceOp> ops);
    bool parents_done() const;

    void cycle(uint64_t now, RunMetrics& m);
    void load_done(uint32_t warp);

    uint32_t issued_last_cycle() const { return issued_last_; }
    const std::vector<SlotEvent>& slot_events() const { return events_; }
    uint64_t warp_outstanding(uint32_t warp) const { return warps_[warp].outstanding_loads; }

private:
    enum class Why : uint8_t { None, Memory, Compute, Dependence };

    struct Warp {
        std::vector<TraceOp> prog;
        size_t pc = 0;
        uint32_t outstanding_loads = 0;
        uint64_t busy_until = 0; // in-order wait after an ALU op
        uint64_t last_issue = 0;
    };

    bool issue_parent(Warp& w, uint64_t now, RunMetrics& m, Why& why);
    bool issue_assist(AssistEntry& e, uint64_t now, RunMetrics& m, Why& why);
    static void raise(Why& agg, Why w);

    PipeConfig cfg_;
    MemoryBackend* mem_;
    AssistController* awc_;
    std::vector<Warp> warps_;
    std::vector<int> greedy_; // current GTO warp per scheduler, -1 none
    std::vector<SlotEvent> events_;
    uint32_t issued_last_ = 0;
};

} // namespace caba
