#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "caba/awc.hpp"
#include "caba/codec.hpp"
#include "caba/memhier.hpp"
#include "caba/metrics.hpp"
#include "caba/pipeline.hpp"
#include "caba/workload.hpp"

namespace caba {

struct SimModes {
    Algorithm algorithm = Algorithm::NONE; // NONE never deploys assists
    bool best_of_all = false;              // try every compressor per writeback
    bool uncompressed_l2 = false;          // decompress once at the DRAM->L2 fill
    bool caba_absent = false;              // no assist machinery at all
};

struct SimConfig {
    CodecConfig codec;
    MemConfig mem;
    PipeConfig pipe;
    AwcConfig awc;
    SimModes modes;
    uint64_t max_cycles = 50'000'000; // hard stop for runaway configurations
};

// Orchestrates the load and store paths across the store buffer, the caches,
// the metadata directory, and the DRAM, firing assist triggers where stored
// forms need translating. Functional state (the memory image, metadata
// codes) updates eagerly; the state machines charge the transfer timing.
// Loads observe memory at completion time.
class MemorySystem : public MemoryBackend {
public:
    using StoreDataFn = std::function<std::vector<uint8_t>(uint64_t line)>;
    using LoadObserver = std::function<void(uint32_t warp, uint64_t addr, uint32_t size,
                                            const std::vector<uint8_t>& bytes)>;

    MemorySystem(const SimConfig& cfg, AssistController* awc, MemoryImage::InitFn init);

    void set_pipeline(Pipeline* p) { pipe_ = p; }
    void set_store_data(StoreDataFn fn) { store_data_ = std::move(fn); }
    void set_load_observer(LoadObserver fn) { observer_ = std::move(fn); }

    MemStall try_load(uint32_t warp, uint64_t addr, uint32_t size, uint64_t now) override;
    MemStall try_store(uint32_t warp, uint64_t addr, uint32_t size, uint64_t now) override;

    void tick(uint64_t now);
    void begin_drain() { draining_ = true; }
    bool drained() const;

    // Routes assist completions back into the fill / writeback machinery.
    void on_assist_done(AssistEntry& e, bool killed);

    void collect(RunMetrics& m) const;
    MemoryImage& image() { return image_; }
    const DramModel& dram() const { return dram_; }
    size_t store_buffer_lines() const { return sb_.size(); }
    size_t fills_in_flight() const { return fills_.size(); }

private:
    struct L2Line {
        uint8_t enc = 0; // stored-form encoding id, 0 = raw
        uint32_t total = 0;
    };
    struct Waiter {
        uint32_t warp;
        uint64_t addr;
        uint32_t size;
    };
    struct Fill {
        enum class Stage : uint8_t {
            Lookup,         // L1+L2 lookup latency running
            MdWait,         // metadata burst in flight
            DramWait,       // line burst in flight
            TriggerWait,    // decompress trigger rejected; refire
            DecompressWait, // assist running
        };
        Stage stage = Stage::Lookup;
        uint64_t ready_at = 0;
        uint64_t dram_id = 0;
        uint8_t enc = 0;         // stored encoding id once known
        uint32_t total = 0;      // stored size once known
        bool at_l2_fill = false; // decompressing for the L2 (uncompressed_l2)
        bool assist_live = false;
        std::vector<Waiter> waiters;
    };
    struct Partial {
        enum class Stage : uint8_t { MdWait, FetchWait, TriggerWait, DecompressWait, Done };
        Stage stage = Stage::MdWait;
        uint64_t dram_id = 0;
        std::vector<uint8_t> staged; // old stored form for the decompressor
        uint8_t enc = 0;
        uint32_t total = 0;
        uint32_t warp = 0;
        bool assist_live = false;
    };
    struct CompressCtx {
        std::vector<uint8_t> snapshot;
        std::vector<CompressedLine> results;
        uint32_t warp = 0;
        bool abandon = false; // newer bytes arrived; discard this attempt
        bool assist_live = false;
    };
    struct Event {
        uint64_t at;
        uint64_t seq;
        Waiter w;
    };

    uint64_t line_of(uint64_t addr) const { return addr / cfg_.codec.line_size; }
    std::vector<uint8_t> read_bytes(uint64_t line, uint32_t off, uint32_t size);
    std::vector<uint8_t> store_bytes(uint64_t line, uint32_t off, uint32_t size);
    void complete_waiters(Fill& f, uint64_t line, uint64_t now);
    void schedule(uint64_t at, const Waiter& w);
    void pump_events(uint64_t now);
    void process_fill(uint64_t line, Fill& f, uint64_t now);
    void fire_fill_trigger(uint64_t line, Fill& f, uint64_t now);
    void fire_partial_trigger(uint64_t line, Partial& p, uint64_t now);
    void start_partial_release(uint64_t line, StoreBuffer::Entry& e, uint64_t now);
    void finish_partial(uint64_t line, Partial& p, uint64_t now);
    void evict_for_space(uint64_t now);
    void note_store_eligible(uint64_t line, uint32_t warp);
    bool fire_compress(uint64_t line, uint64_t now);
    void compress_done(uint64_t line, CompressCtx& ctx, AssistEntry& e, bool killed,
                       uint64_t now);
    void release_with(uint64_t line, CompressedLine stored);
    void release_raw_now(uint64_t line);
    Algorithm chain_alg(const CompressCtx& ctx) const;
    bool assists_enabled() const {
        return awc_ && (cfg_.modes.algorithm != Algorithm::NONE || cfg_.modes.best_of_all);
    }

    SimConfig cfg_;
    AssistController* awc_;
    Pipeline* pipe_ = nullptr;
    MemoryImage image_;
    LruCache<char> l1_;
    LruCache<L2Line> l2_;
    MetadataSystem md_;
    StoreBuffer sb_;
    DramModel dram_;
    StoreDataFn store_data_;
    LoadObserver observer_;

    std::map<uint64_t, Fill> fills_;          // line -> fill machine
    std::map<uint64_t, Partial> partials_;    // line -> partial writeback
    std::map<uint64_t, CompressCtx> compress_; // line -> writeback compression
    std::set<uint64_t> pending_compress_;     // full lines waiting to fire
    std::map<uint64_t, uint32_t> store_warp_; // last warp to write each line
    std::vector<Event> events_;
    uint64_t next_seq_ = 0;
    uint64_t now_ = 0;
    bool draining_ = false;

    uint64_t l1_hits_ = 0, l1_misses_ = 0;
    uint64_t l2_hits_ = 0, l2_misses_ = 0;
    uint64_t raw_equivalent_bursts_ = 0;
};

// Owns the whole machine for one run: pipeline, controller, memory system,
// and the drain loop, producing a finalized metrics row. Construction wires
// everything up (so callers may preload the memory image or swap the store
// data source first); run() executes once.
class Simulator {
public:
    Simulator(const SimConfig& cfg, const WorkloadConfig& wl);
    Simulator(const SimConfig& cfg, const WorkloadConfig& wl, std::vector<TraceOp> trace);

    void set_cycle_trace(std::ostream* os, uint64_t limit);
    void set_load_observer(MemorySystem::LoadObserver fn);

    RunMetrics run();

    MemorySystem& memory() { return *mem_; }
    const SubroutineLibrary& library() const { return lib_; }
    const std::vector<TraceOp>& trace() const { return trace_; }

private:
    SimConfig cfg_;
    WorkloadConfig wl_;
    std::vector<TraceOp> trace_;
    SubroutineLibrary lib_;
    std::unique_ptr<AssistController> awc_;
    std::unique_ptr<MemorySystem> mem_;
    std::unique_ptr<Pipeline> pipe_;
    std::ostream* trace_os_ = nullptr;
    uint64_t trace_limit_ = 0;
};

} // namespace caba
