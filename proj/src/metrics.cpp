#include "caba/metrics.hpp"

#include <iomanip>
#include <sstream>

namespace caba {

void RunMetrics::finalize() {
    ipc = cycles ? double(parent_instructions) / double(cycles) : 0.0;
    bandwidth_utilization = cycles ? double(busy_cycles) / double(cycles) : 0.0;
    compression_ratio =
        data_bursts ? double(raw_equivalent_bursts) / double(data_bursts) : 1.0;
    md_hit_rate = md_lookups ? double(md_hits) / double(md_lookups) : 1.0;
}

std::string metrics_csv_header() {
    return "cycles,parent_instructions,assist_instructions,ipc,"
           "bandwidth_utilization,compression_ratio,md_hit_rate,"
           "slots_active,slots_memory,slots_compute,slots_data_dependence,"
           "slots_idle,l1_hits,l1_misses,l2_hits,l2_misses,dram_reads,"
           "dram_writes,data_bursts,raw_equivalent_bursts,md_miss_bursts,"
           "busy_cycles,md_lookups,md_hits,assists_attempted,assists_deployed,"
           "assists_completed,assists_killed,assists_rejected_busy,"
           "assists_rejected_full";
}

std::string metrics_csv_row(const RunMetrics& m) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    os << m.cycles << ',' << m.parent_instructions << ',' << m.assist_instructions
       << ',' << m.ipc << ',' << m.bandwidth_utilization << ',' << m.compression_ratio
       << ',' << m.md_hit_rate << ',' << m.breakdown.active << ',' << m.breakdown.memory
       << ',' << m.breakdown.compute << ',' << m.breakdown.data_dependence << ','
       << m.breakdown.idle << ',' << m.l1_hits << ',' << m.l1_misses << ',' << m.l2_hits
       << ',' << m.l2_misses << ',' << m.dram_reads << ',' << m.dram_writes << ','
       << m.data_bursts << ',' << m.raw_equivalent_bursts << ',' << m.md_miss_bursts
       << ',' << m.busy_cycles << ',' << m.md_lookups << ',' << m.md_hits << ','
       << m.triggers.attempts << ',' << m.triggers.deployed << ',' << m.triggers.completed
       << ',' << m.triggers.killed << ',' << m.triggers.rejected_busy << ','
       << m.triggers.rejected_full;
    return os.str();
}

} // namespace caba
