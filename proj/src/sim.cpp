#include "caba/sim.hpp"

#include <algorithm>
#include <cassert>
#include <ostream>
#include <stdexcept>

namespace caba {

namespace {

uint8_t stored_id(const CompressedLine& c) {
    return c.compressed() ? encoding_id(c.algorithm, c.encoding) : 0;
}

} // namespace

MemorySystem::MemorySystem(const SimConfig& cfg, AssistController* awc,
                           MemoryImage::InitFn init)
    : cfg_(cfg), awc_(awc), image_(cfg.mem, std::move(init)),
      l1_(cfg.mem.l1_bytes / cfg.mem.line_size / cfg.mem.l1_ways, cfg.mem.l1_ways),
      l2_(cfg.mem.l2_bytes / cfg.mem.line_size / cfg.mem.l2_ways, cfg.mem.l2_ways),
      md_(cfg.mem), sb_(cfg.mem.store_buffer_lines, cfg.mem.line_size), dram_(cfg.mem) {
    if (cfg.mem.line_size != cfg.codec.line_size ||
        cfg.mem.burst_size != cfg.codec.burst_size)
        throw std::invalid_argument("memory and codec line/burst geometry disagree");
    store_data_ = [sz = cfg.mem.line_size](uint64_t) {
        return std::vector<uint8_t>(sz, 0);
    };
}

std::vector<uint8_t> MemorySystem::read_bytes(uint64_t line, uint32_t off, uint32_t size) {
    std::vector<uint8_t> raw = image_.read_raw(line);
    if (auto* e = sb_.find(line))
        sb_.forward(*e, raw);
    return {raw.begin() + off, raw.begin() + off + size};
}

std::vector<uint8_t> MemorySystem::store_bytes(uint64_t line, uint32_t off, uint32_t size) {
    std::vector<uint8_t> full = store_data_(line);
    return {full.begin() + off, full.begin() + off + size};
}

void MemorySystem::schedule(uint64_t at, const Waiter& w) {
    events_.push_back({at, next_seq_++, w});
}

MemStall MemorySystem::try_load(uint32_t warp, uint64_t addr, uint32_t size, uint64_t now) {
    uint64_t line = line_of(addr);
    uint32_t off = uint32_t(addr % cfg_.codec.line_size);
    if (line >= image_.num_lines() || off + size > cfg_.codec.line_size)
        throw std::out_of_range("load outside the modeled memory");

    if (auto* e = sb_.find(line)) {
        bool covered = true;
        for (uint32_t i = 0; i < size && covered; ++i)
            covered = e->dirty[off + i];
        if (covered) { // full forward from the store buffer
            l1_hits_++;
            schedule(now + cfg_.mem.l1_hit_latency, {warp, addr, size});
            return MemStall::Accepted;
        }
    }
    if (l1_.find(line)) {
        l1_hits_++;
        schedule(now + cfg_.mem.l1_hit_latency, {warp, addr, size});
        return MemStall::Accepted;
    }
    l1_misses_++;

    auto it = fills_.find(line);
    if (it != fills_.end()) { // join the fill already in flight
        it->second.waiters.push_back({warp, addr, size});
        return MemStall::Accepted;
    }
    if (fills_.size() >= cfg_.mem.mem_queue_depth)
        return MemStall::QueueFull;

    Fill f;
    f.stage = Fill::Stage::Lookup;
    f.ready_at = now + cfg_.mem.l1_hit_latency + cfg_.mem.l2_hit_latency;
    f.waiters.push_back({warp, addr, size});
    fills_.emplace(line, std::move(f));
    return MemStall::Accepted;
}

MemStall MemorySystem::try_store(uint32_t warp, uint64_t addr, uint32_t size, uint64_t now) {
    uint64_t line = line_of(addr);
    uint32_t off = uint32_t(addr % cfg_.codec.line_size);
    if (line >= image_.num_lines() || off + size > cfg_.codec.line_size)
        throw std::out_of_range("store outside the modeled memory");

    auto* e = sb_.find(line);
    if (!e) {
        if (!sb_.has_space()) {
            evict_for_space(now);
            return MemStall::BufferFull; // retried next cycle
        }
        e = &sb_.allocate(line);
    }
    store_warp_[line] = warp;

    std::vector<uint8_t> data = store_bytes(line, off, size);
    bool changed = false;
    for (uint32_t i = 0; i < size && !changed; ++i)
        changed = !e->dirty[off + i] || e->bytes[off + i] != data[i];
    if (changed) {
        sb_.merge(*e, off, data);
        if (e->full())
            note_store_eligible(line, warp);
    }
    return MemStall::Accepted;
}

void MemorySystem::note_store_eligible(uint64_t line, uint32_t warp) {
    store_warp_[line] = warp;
    if (!assists_enabled())
        return; // the line waits for eviction or drain
    auto cit = compress_.find(line);
    if (cit != compress_.end()) {
        // The running attempt compresses stale bytes; discard and restart.
        if (cit->second.assist_live) {
            cit->second.abandon = true;
            awc_->kill_line(line);
            return; // the completion handler queues the refire
        }
        compress_.erase(cit);
    }
    pending_compress_.insert(line);
}

Algorithm MemorySystem::chain_alg(const CompressCtx& ctx) const {
    if (!cfg_.modes.best_of_all)
        return ctx.results.empty() ? cfg_.modes.algorithm : Algorithm::NONE;
    static constexpr Algorithm kOrder[3] = {Algorithm::BDI, Algorithm::CPACK,
                                            Algorithm::FPC};
    return ctx.results.size() < 3 ? kOrder[ctx.results.size()] : Algorithm::NONE;
}

bool MemorySystem::fire_compress(uint64_t line, uint64_t now) {
    if (!assists_enabled())
        return false;
    auto cit = compress_.find(line);
    if (cit == compress_.end()) {
        auto* e = sb_.find(line);
        if (!e || !e->full() || !awc_->low_deploy_enabled())
            return false; // stays pending until the controller has slack
        CompressCtx ctx;
        ctx.snapshot = e->bytes;
        ctx.warp = store_warp_[line];
        cit = compress_.emplace(line, std::move(ctx)).first;
    }
    CompressCtx& ctx = cit->second;
    if (ctx.assist_live)
        return true;
    while (true) {
        Algorithm alg = chain_alg(ctx);
        if (alg == Algorithm::NONE) {
            // Every requested compressor ran over the same snapshot: fewest
            // bursts wins, ties keep the earlier algorithm, raw is the floor.
            CompressedLine best = store_raw(ctx.snapshot, cfg_.codec);
            for (const CompressedLine& r : ctx.results)
                if (burst_count(r.total_size(), cfg_.codec) <
                    burst_count(best.total_size(), cfg_.codec))
                    best = r;
            release_with(line, std::move(best));
            return true;
        }
        Trigger t;
        t.kind = TriggerKind::StoreEligible;
        t.line = line;
        t.algorithm = alg;
        auto r = awc_->fire(t, ctx.snapshot, {line * cfg_.codec.line_size},
                            cfg_.codec.line_size, ctx.warp, now);
        if (r == AssistController::FireResult::Deployed) {
            ctx.assist_live = true;
            pending_compress_.erase(line);
            return true;
        }
        if (r == AssistController::FireResult::NoHandler) {
            // No routine for this algorithm at this geometry: it contributes
            // nothing better than raw, so record raw and move on.
            ctx.results.push_back(store_raw(ctx.snapshot, cfg_.codec));
            continue;
        }
        pending_compress_.insert(line);
        return false;
    }
}

void MemorySystem::release_with(uint64_t line, CompressedLine stored) {
    uint8_t id = stored_id(stored);
    size_t total = stored.total_size();
    image_.write(line, std::move(stored));
    md_.write(line, id == 0 ? MetadataSystem::kRaw
                            : uint8_t(encoding_id_algorithm(id)));
    if (auto* p = l2_.find(line)) {
        if (cfg_.modes.uncompressed_l2)
            *p = {0, cfg_.codec.line_size};
        else
            *p = {id, uint32_t(total)};
    }
    dram_.push(line, burst_count(total, cfg_.codec), true, false, now_);
    raw_equivalent_bursts_ += burst_count(cfg_.codec.line_size, cfg_.codec);
    sb_.release(line);
    compress_.erase(line);
    pending_compress_.erase(line);
}

void MemorySystem::release_raw_now(uint64_t line) {
    auto* e = sb_.find(line);
    assert(e);
    release_with(line, store_raw(e->bytes, cfg_.codec));
}

void MemorySystem::evict_for_space(uint64_t now) {
    auto* victim = sb_.oldest();
    if (!victim)
        return;
    uint64_t line = victim->line;
    if (victim->full()) {
        if (assists_enabled()) {
            // The line is queued for (or inside) compression; let it finish.
            // The storing warp stalls, which frees the very issue slots the
            // low-priority assist needs to make progress.
            if (!compress_.count(line))
                pending_compress_.insert(line);
            return;
        }
        release_raw_now(line);
        return;
    }
    start_partial_release(line, *victim, now);
}

void MemorySystem::start_partial_release(uint64_t line, StoreBuffer::Entry& e,
                                         uint64_t now) {
    // Timing probes against the old stored form come first; then functional
    // state moves forward eagerly and only transfer costs remain.
    auto md_r = md_.lookup(line);
    CompressedLine old_stored = image_.read(line);

    Partial p;
    p.staged = old_stored.data;
    p.enc = stored_id(old_stored);
    p.total = uint32_t(old_stored.total_size());
    p.warp = store_warp_[line];

    std::vector<uint8_t> merged = image_.read_raw(line);
    sb_.forward(e, merged);
    image_.write(line, store_raw(merged, cfg_.codec));
    md_.write(line, MetadataSystem::kRaw);
    if (auto* l2p = l2_.find(line))
        *l2p = {0, cfg_.codec.line_size};
    sb_.release(line);
    pending_compress_.erase(line);

    uint32_t fetch_bursts = burst_count(p.total, cfg_.codec);
    if (md_r.hit) {
        p.stage = Partial::Stage::FetchWait;
        p.dram_id = dram_.push(line, fetch_bursts, false, false, now);
        raw_equivalent_bursts_ += burst_count(cfg_.codec.line_size, cfg_.codec);
    } else {
        p.stage = Partial::Stage::MdWait;
        p.dram_id = dram_.push(line, 1, false, true, now);
    }
    partials_.emplace(line, std::move(p));
}

void MemorySystem::finish_partial(uint64_t line, Partial&, uint64_t now) {
    dram_.push(line, burst_count(cfg_.codec.line_size, cfg_.codec), true, false, now);
    raw_equivalent_bursts_ += burst_count(cfg_.codec.line_size, cfg_.codec);
    partials_.erase(line);
}

void MemorySystem::fire_partial_trigger(uint64_t line, Partial& p, uint64_t now) {
    Trigger t;
    t.kind = TriggerKind::CompressedFill;
    t.line = line;
    t.encoding = p.enc;
    auto r = awc_->fire(t, p.staged, {line * cfg_.codec.line_size, p.total},
                        cfg_.codec.line_size, p.warp, now);
    if (r == AssistController::FireResult::Deployed) {
        p.stage = Partial::Stage::DecompressWait;
        p.assist_live = true;
    } else {
        p.stage = Partial::Stage::TriggerWait;
    }
}

void MemorySystem::fire_fill_trigger(uint64_t line, Fill& f, uint64_t now) {
    // Re-read the stored form at fire time: a writeback may have replaced it
    // while the trigger waited, and the staged bytes must match the encoding.
    const CompressedLine& stored = image_.read(line);
    f.enc = stored_id(stored);
    f.total = uint32_t(stored.total_size());
    if (f.enc == 0) { // went raw while we waited; nothing to translate
        if (f.at_l2_fill) {
            l2_.insert(line, {0, cfg_.codec.line_size}, false);
            f.at_l2_fill = false;
        }
        complete_waiters(f, line, now);
        return;
    }
    Trigger t;
    t.kind = TriggerKind::CompressedFill;
    t.line = line;
    t.encoding = f.enc;
    auto r = awc_->fire(t, stored.data, {line * cfg_.codec.line_size, f.total},
                        cfg_.codec.line_size, f.waiters.front().warp, now);
    if (r == AssistController::FireResult::Deployed) {
        f.stage = Fill::Stage::DecompressWait;
        f.assist_live = true;
    } else {
        f.stage = Fill::Stage::TriggerWait;
    }
}

void MemorySystem::complete_waiters(Fill& f, uint64_t line, uint64_t now) {
    l1_.insert(line, 0, false);
    for (const Waiter& w : f.waiters)
        schedule(now, w);
    fills_.erase(line);
}

// A fill has its stored form at hand (L2 hit, or DRAM data just installed):
// either it translates through an assist or it completes directly.
void MemorySystem::process_fill(uint64_t line, Fill& f, uint64_t now) {
    if (f.enc != 0 && assists_enabled() && !f.at_l2_fill) {
        fire_fill_trigger(line, f, now);
        return;
    }
    complete_waiters(f, line, now);
}

void MemorySystem::on_assist_done(AssistEntry& e, bool killed) {
    uint64_t line = e.line;
    if (e.direction == Direction::Decompress) {
        auto fit = fills_.find(line);
        if (fit != fills_.end() && fit->second.assist_live) {
            Fill& f = fit->second;
            f.assist_live = false;
            if (killed) { // refire next tick
                f.stage = Fill::Stage::TriggerWait;
                return;
            }
            if (f.at_l2_fill) { // uncompressed_l2: the L2 now holds raw data
                l2_.insert(line, {0, cfg_.codec.line_size}, false);
                f.at_l2_fill = false;
                f.enc = 0;
                f.total = cfg_.codec.line_size;
            }
            complete_waiters(f, line, now_);
            return;
        }
        auto pit = partials_.find(line);
        if (pit != partials_.end() && pit->second.assist_live) {
            Partial& p = pit->second;
            p.assist_live = false;
            if (killed) {
                p.stage = Partial::Stage::TriggerWait;
                return;
            }
            finish_partial(line, p, now_);
            return;
        }
        return; // an explicitly killed orphan; nothing to clean up
    }

    auto cit = compress_.find(line);
    if (cit == compress_.end())
        return;
    compress_done(line, cit->second, e, killed, now_);
}

void MemorySystem::compress_done(uint64_t line, CompressCtx& ctx, AssistEntry& e,
                                 bool killed, uint64_t now) {
    ctx.assist_live = false;
    if (killed) {
        bool abandon = ctx.abandon;
        compress_.erase(line);
        if (abandon) {
            auto* entry = sb_.find(line);
            if (entry && entry->full())
                pending_compress_.insert(line);
        } else {
            release_raw_now(line); // timeout or forced eviction: fall back raw
        }
        return;
    }

    auto louts = e.engine->live_out();
    assert(louts.size() == 2);
    CompressedLine stored = assemble_stored(uint8_t(louts[0]), e.ws.out,
                                            size_t(louts[1]), e.ws.in, cfg_.codec);
    if (!cfg_.modes.best_of_all) {
        release_with(line, std::move(stored));
        return;
    }
    ctx.results.push_back(std::move(stored));
    fire_compress(line, now); // next algorithm, or pick the winner
}

void MemorySystem::tick(uint64_t now) {
    now_ = now;

    // 1. DRAM completions route back into the fill / writeback machines.
    for (uint64_t id : dram_.tick(now)) {
        bool routed = false;
        for (auto& [line, f] : fills_) {
            if (f.dram_id != id ||
                (f.stage != Fill::Stage::MdWait && f.stage != Fill::Stage::DramWait))
                continue;
            routed = true;
            if (f.stage == Fill::Stage::MdWait) {
                const CompressedLine& stored = image_.read(line);
                f.dram_id = dram_.push(line, burst_count(stored.total_size(), cfg_.codec),
                                       false, false, now);
                raw_equivalent_bursts_ += burst_count(cfg_.codec.line_size, cfg_.codec);
                f.stage = Fill::Stage::DramWait;
            } else { // line arrived from DRAM
                const CompressedLine& stored = image_.read(line);
                f.enc = stored_id(stored);
                f.total = uint32_t(stored.total_size());
                if (cfg_.modes.uncompressed_l2) {
                    if (f.enc != 0 && assists_enabled()) {
                        f.at_l2_fill = true;
                        fire_fill_trigger(line, f, now);
                    } else {
                        l2_.insert(line, {0, cfg_.codec.line_size}, false);
                        f.enc = 0;
                        f.total = cfg_.codec.line_size;
                        process_fill(line, f, now);
                    }
                } else {
                    l2_.insert(line, {f.enc, f.total}, false);
                    process_fill(line, f, now);
                }
            }
            break;
        }
        if (routed)
            continue;
        for (auto& [line, p] : partials_) {
            if (p.dram_id != id ||
                (p.stage != Partial::Stage::MdWait && p.stage != Partial::Stage::FetchWait))
                continue;
            if (p.stage == Partial::Stage::MdWait) {
                p.dram_id = dram_.push(line, burst_count(p.total, cfg_.codec), false,
                                       false, now);
                raw_equivalent_bursts_ += burst_count(cfg_.codec.line_size, cfg_.codec);
                p.stage = Partial::Stage::FetchWait;
            } else if (p.enc != 0 && assists_enabled()) {
                fire_partial_trigger(line, p, now);
            } else {
                finish_partial(line, p, now);
            }
            break;
        }
        // Write completions need no routing.
    }

    // 2. Fills whose lookup latency elapsed learn their hit/miss fate.
    std::vector<uint64_t> ready;
    for (auto& [line, f] : fills_)
        if (f.stage == Fill::Stage::Lookup && f.ready_at <= now)
            ready.push_back(line);
    for (uint64_t line : ready) {
        Fill& f = fills_.at(line);
        if (auto* p = l2_.find(line)) {
            l2_hits_++;
            f.enc = p->enc;
            f.total = p->total;
            process_fill(line, f, now);
        } else {
            l2_misses_++;
            auto md_r = md_.lookup(line);
            const CompressedLine& stored = image_.read(line);
            if (md_r.hit) {
                f.dram_id = dram_.push(line, burst_count(stored.total_size(), cfg_.codec),
                                       false, false, now);
                raw_equivalent_bursts_ += burst_count(cfg_.codec.line_size, cfg_.codec);
                f.stage = Fill::Stage::DramWait;
            } else {
                f.dram_id = dram_.push(line, 1, false, true, now);
                f.stage = Fill::Stage::MdWait;
            }
        }
    }

    // 3. Rejected triggers retry until the controller accepts them.
    std::vector<uint64_t> refire;
    for (auto& [line, f] : fills_)
        if (f.stage == Fill::Stage::TriggerWait)
            refire.push_back(line);
    for (uint64_t line : refire) {
        Fill& f = fills_.at(line);
        if (cfg_.modes.uncompressed_l2 && f.at_l2_fill)
            fire_fill_trigger(line, f, now);
        else
            process_fill(line, f, now);
    }
    refire.clear();
    for (auto& [line, p] : partials_)
        if (p.stage == Partial::Stage::TriggerWait)
            refire.push_back(line);
    for (uint64_t line : refire)
        fire_partial_trigger(line, partials_.at(line), now);

    // 4. Full store-buffer lines waiting for a compressor.
    for (uint64_t line : std::vector<uint64_t>(pending_compress_.begin(),
                                               pending_compress_.end()))
        fire_compress(line, now);

    // 5. Draining flushes the store buffer as compressors come free.
    if (draining_) {
        std::vector<uint64_t> lines;
        for (auto* e : sb_.all())
            lines.push_back(e->line);
        for (uint64_t line : lines) {
            if (compress_.count(line) || partials_.count(line))
                continue;
            auto* e = sb_.find(line);
            if (!e)
                continue;
            if (e->full()) {
                if (assists_enabled())
                    pending_compress_.insert(line);
                else
                    release_raw_now(line);
            } else {
                start_partial_release(line, *e, now);
            }
        }
    }

    pump_events(now);
}

void MemorySystem::pump_events(uint64_t now) {
    std::vector<Event> due;
    events_.erase(std::remove_if(events_.begin(), events_.end(),
                                 [&](const Event& ev) {
                                     if (ev.at > now)
                                         return false;
                                     due.push_back(ev);
                                     return true;
                                 }),
                  events_.end());
    std::sort(due.begin(), due.end(), [](const Event& a, const Event& b) {
        return a.at != b.at ? a.at < b.at : a.seq < b.seq;
    });
    for (const Event& ev : due) {
        uint64_t line = line_of(ev.w.addr);
        uint32_t off = uint32_t(ev.w.addr % cfg_.codec.line_size);
        std::vector<uint8_t> bytes = read_bytes(line, off, ev.w.size);
        if (observer_)
            observer_(ev.w.warp, ev.w.addr, ev.w.size, bytes);
        pipe_->load_done(ev.w.warp);
    }
}

bool MemorySystem::drained() const {
    return fills_.empty() && partials_.empty() && compress_.empty() &&
           pending_compress_.empty() && events_.empty() && sb_.size() == 0 &&
           dram_.idle();
}

void MemorySystem::collect(RunMetrics& m) const {
    m.l1_hits = l1_hits_;
    m.l1_misses = l1_misses_;
    m.l2_hits = l2_hits_;
    m.l2_misses = l2_misses_;
    m.dram_reads = dram_.reads;
    m.dram_writes = dram_.writes;
    m.data_bursts = dram_.data_bursts;
    m.md_miss_bursts = dram_.md_bursts;
    m.busy_cycles = dram_.busy_cycles;
    m.raw_equivalent_bursts = raw_equivalent_bursts_;
    m.md_lookups = md_.lookups();
    m.md_hits = md_.hits();
}

Simulator::Simulator(const SimConfig& cfg, const WorkloadConfig& wl)
    : Simulator(cfg, wl, generate_workload(wl, cfg.codec.line_size)) {}

Simulator::Simulator(const SimConfig& cfg, const WorkloadConfig& wl,
                     std::vector<TraceOp> trace)
    : cfg_(cfg), wl_(wl), trace_(std::move(trace)) {
    lib_ = build_library(cfg_.codec);
    if (!cfg_.modes.caba_absent)
        awc_ = std::make_unique<AssistController>(cfg_.awc, lib_);

    auto data_fn = [wl = wl_, ls = cfg_.codec.line_size](uint64_t line) {
        return line_data(line, wl.profile, wl.seed, ls);
    };
    auto init_fn = [data_fn](uint64_t line, std::span<uint8_t> bytes) {
        std::vector<uint8_t> v = data_fn(line);
        std::copy(v.begin(), v.end(), bytes.begin());
    };
    mem_ = std::make_unique<MemorySystem>(cfg_, awc_.get(), init_fn);
    mem_->set_store_data(data_fn);
    if (awc_)
        awc_->set_completion_handler(
            [m = mem_.get()](AssistEntry& e, bool killed) { m->on_assist_done(e, killed); });

    pipe_ = std::make_unique<Pipeline>(cfg_.pipe, *mem_, awc_.get());
    mem_->set_pipeline(pipe_.get());
    pipe_->load_program(trace_);
}

void Simulator::set_cycle_trace(std::ostream* os, uint64_t limit) {
    trace_os_ = os;
    trace_limit_ = limit;
}

void Simulator::set_load_observer(MemorySystem::LoadObserver fn) {
    mem_->set_load_observer(std::move(fn));
}

RunMetrics Simulator::run() {
    RunMetrics m;
    uint64_t cycle = 0;
    bool draining = false;
    while (true) {
        if (cycle >= cfg_.max_cycles)
            throw std::runtime_error("simulation exceeded the cycle cap");
        mem_->tick(cycle);
        if (awc_)
            awc_->tick(cycle);
        pipe_->cycle(cycle, m);
        if (awc_)
            awc_->observe_issue(pipe_->issued_last_cycle(), cfg_.pipe.issue_width);
        if (trace_os_ && cycle < trace_limit_) {
            *trace_os_ << "c " << cycle;
            for (const auto& ev : pipe_->slot_events())
                *trace_os_ << " | " << (ev.text.empty() ? "-" : ev.text);
            *trace_os_ << " | dram " << mem_->dram().in_flight() << " | sb "
                       << mem_->store_buffer_lines() << " | aw "
                       << (awc_ ? awc_->live() : 0) << "\n";
        }
        cycle++;
        if (!draining && pipe_->parents_done()) {
            mem_->begin_drain();
            draining = true;
        }
        if (draining && pipe_->parents_done() && mem_->drained() &&
            (!awc_ || awc_->live() == 0))
            break;
    }

    m.cycles = cycle;
    mem_->collect(m);
    if (awc_)
        m.triggers = awc_->counters();
    m.finalize();
    return m;
}

} // namespace caba
