#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "caba/engine.hpp"
#include "caba/isa.hpp"
#include "caba/metrics.hpp"

namespace caba {

enum class TriggerKind : uint8_t {
    CompressedFill, // a compressed line arrived; needs decompression
    StoreEligible,  // a fully dirty line may be compressed before writeback
    Custom,         // extension point; no handler installed
};

struct Trigger {
    TriggerKind kind = TriggerKind::Custom;
    uint64_t line = 0;
    uint8_t encoding = 0;                  // encoding id byte, fills only
    Algorithm algorithm = Algorithm::NONE; // compressor to run, stores only
};

enum class AssistState : uint8_t { Deploying, Active };

struct AssistEntry {
    uint32_t id = 0;
    int sr_id = -1;
    Direction direction = Direction::Decompress;
    Priority priority = Priority::High;
    AssistState state = AssistState::Deploying;
    uint64_t line = 0;
    uint8_t encoding = 0; // encoding id byte of the routine's result/input
    uint32_t parent_warp = 0;
    uint64_t deployed_at = 0;
    AssistWorkspace ws;
    std::unique_ptr<MicroEngine> engine; // constructed when Active

    // Scheduling state owned by the pipeline: when each register's value
    // lands, whether its producer was a memory op (for stall attribution),
    // and the completion times of issued loads/stores (exit drains them).
    std::array<uint64_t, 32> reg_ready{};
    std::array<uint8_t, 32> reg_from_mem{};
    uint64_t gpred_ready = 0;
    std::vector<uint64_t> mem_done;
};

struct AwcConfig {
    uint32_t awt_entries = 48;            // one per warp slot
    uint32_t awb_low_entries = 2;         // low-priority buffer partition
    uint32_t high_slots_per_warp = 2;     // overlay slots in the parent's buffer
    uint32_t assist_decode_per_cycle = 1;
    double throttle_threshold = 0.9;      // issue-slot utilization that parks low work
    uint32_t throttle_window = 128;       // cycles per utilization sample
    uint64_t low_priority_timeout = 10000;
};

// Deploys trigger handlers into the assist table, meters decode bandwidth,
// throttles low-priority work when the core has no slack, and reaps
// starved entries. Completion and kill outcomes flow back through a handler
// installed by the memory system.
class AssistController {
public:
    enum class FireResult { Deployed, RejectedBusy, RejectedFull, NoHandler };

    // handler(entry, killed): killed=false means the routine exited.
    using CompletionFn = std::function<void(AssistEntry&, bool killed)>;

    AssistController(const AwcConfig& cfg, const SubroutineLibrary& lib);

    void set_completion_handler(CompletionFn fn) { on_done_ = std::move(fn); }

    FireResult fire(const Trigger& t, std::vector<uint8_t> staged_in,
                    std::vector<uint64_t> live_in, uint32_t line_size,
                    uint32_t parent_warp, uint64_t now);

    // Decode pending deployments and reap starved low-priority entries.
    void tick(uint64_t now);

    // Throttle input: issue-slot occupancy of this cycle.
    void observe_issue(uint32_t active_slots, uint32_t total_slots);
    bool low_deploy_enabled() const { return !throttled_; }

    // Entries the schedulers may issue from, in table order.
    std::vector<AssistEntry*> active_entries();

    // The pipeline calls this when an entry's engine reaches exit.
    void finish(AssistEntry& e);
    void kill_line(uint64_t line);
    void kill_all();

    bool line_busy(uint64_t line) const;
    size_t live() const;
    size_t live_low_active() const;
    const TriggerCounters& counters() const { return counters_; }

private:
    int slot_of(const AssistEntry& e) const;
    void remove_slot(size_t slot, bool killed);
    bool can_activate(const AssistEntry& e) const;

    AwcConfig cfg_;
    const SubroutineLibrary* lib_;
    std::vector<std::optional<AssistEntry>> table_;
    CompletionFn on_done_;
    TriggerCounters counters_;
    uint32_t next_id_ = 1;
    uint32_t decode_rr_ = 0; // round-robin start slot for deployment decode
    bool throttled_ = false;
    uint64_t window_active_ = 0;
    uint64_t window_total_ = 0;
    uint64_t window_cycles_ = 0;
};

} // namespace caba
