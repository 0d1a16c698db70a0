#pragma once

#include <cstdint>
#include <string>

namespace caba {

// Issue-slot classification. Every scheduler slot of every cycle lands in
// exactly one bucket, so the five counters always sum to
// cycles * issue_width.
struct CycleBreakdown {
    uint64_t active = 0;          // a warp issued
    uint64_t memory = 0;          // blocked on the memory pipeline
    uint64_t compute = 0;         // blocked on an execution port
    uint64_t data_dependence = 0; // operands still in flight
    uint64_t idle = 0;            // no instruction available

    uint64_t total() const {
        return active + memory + compute + data_dependence + idle;
    }
};

struct TriggerCounters {
    uint64_t attempts = 0;      // every deployment attempt, retries included
    uint64_t deployed = 0;      // accepted into the assist table
    uint64_t completed = 0;     // reached exit
    uint64_t killed = 0;        // removed before exit
    uint64_t rejected_busy = 0; // line already has an active assist
    uint64_t rejected_full = 0; // no free table entry

    uint64_t rejected() const { return rejected_busy + rejected_full; }
};

struct RunMetrics {
    uint64_t cycles = 0;
    uint64_t parent_instructions = 0;
    uint64_t assist_instructions = 0;
    CycleBreakdown breakdown;

    uint64_t l1_hits = 0;
    uint64_t l1_misses = 0;
    uint64_t l2_hits = 0;
    uint64_t l2_misses = 0;
    uint64_t dram_reads = 0;  // line fetches
    uint64_t dram_writes = 0; // line writebacks

    uint64_t data_bursts = 0;           // bursts actually moved on the bus
    uint64_t raw_equivalent_bursts = 0; // bursts the same lines need uncompressed
    uint64_t md_miss_bursts = 0;        // extra bursts for metadata fills
    uint64_t busy_cycles = 0;           // bus cycles spent transferring

    uint64_t md_lookups = 0;
    uint64_t md_hits = 0;

    TriggerCounters triggers;

    // Derived by finalize(); recomputed from the raw counters, so calling it
    // again never changes anything.
    double ipc = 0.0;
    double bandwidth_utilization = 0.0;
    double compression_ratio = 1.0;
    double md_hit_rate = 1.0;

    void finalize();
};

// One fixed-schema row per run; floating columns use six decimals.
std::string metrics_csv_header();
std::string metrics_csv_row(const RunMetrics& m);

} // namespace caba
