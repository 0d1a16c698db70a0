#include "caba/awc.hpp"

#include <algorithm>

namespace caba {

AssistController::AssistController(const AwcConfig& cfg, const SubroutineLibrary& lib)
    : cfg_(cfg), lib_(&lib), table_(cfg.awt_entries) {}

namespace {

int lookup_handler(const SubroutineLibrary& lib, const Trigger& t) {
    switch (t.kind) {
    case TriggerKind::CompressedFill: {
        Algorithm alg = encoding_id_algorithm(t.encoding);
        if (alg == Algorithm::NONE) return -1;
        uint8_t detail = alg == Algorithm::BDI ? encoding_id_detail(t.encoding) : 0;
        return lib.find(alg, detail, Direction::Decompress);
    }
    case TriggerKind::StoreEligible:
        if (t.algorithm == Algorithm::NONE) return -1;
        return lib.find(t.algorithm, 0, Direction::Compress);
    case TriggerKind::Custom:
        return -1;
    }
    return -1;
}

} // namespace

AssistController::FireResult AssistController::fire(const Trigger& t,
                                                    std::vector<uint8_t> staged_in,
                                                    std::vector<uint64_t> live_in,
                                                    uint32_t line_size,
                                                    uint32_t parent_warp, uint64_t now) {
    int sr = lookup_handler(*lib_, t);
    if (sr < 0) return FireResult::NoHandler;
    counters_.attempts++;

    if (line_busy(t.line)) {
        counters_.rejected_busy++;
        return FireResult::RejectedBusy;
    }
    int slot = -1;
    for (size_t i = 0; i < table_.size(); ++i) {
        if (!table_[i]) { slot = static_cast<int>(i); break; }
    }
    if (slot < 0) {
        counters_.rejected_full++;
        return FireResult::RejectedFull;
    }

    const Subroutine& sub = lib_->at(sr);
    AssistEntry& e = table_[slot].emplace();
    e.id = next_id_++;
    e.sr_id = sr;
    e.direction = sub.direction;
    e.priority = sub.priority;
    e.state = AssistState::Deploying;
    e.line = t.line;
    e.encoding = t.encoding;
    e.parent_warp = parent_warp;
    e.deployed_at = now;
    e.ws.in = std::move(staged_in);
    // Compression needs slack past the line so a losing attempt can spill.
    size_t out_bytes = sub.direction == Direction::Compress ? line_size + 16 : line_size;
    e.ws.out.assign(out_bytes, 0);
    e.ws.live_in = std::move(live_in);
    counters_.deployed++;
    return FireResult::Deployed;
}

bool AssistController::can_activate(const AssistEntry& e) const {
    if (e.priority == Priority::Low) {
        return !throttled_ && live_low_active() < cfg_.awb_low_entries;
    }
    uint32_t same_warp = 0;
    for (const auto& slot : table_) {
        if (slot && slot->state == AssistState::Active &&
            slot->priority == Priority::High && slot->parent_warp == e.parent_warp) {
            same_warp++;
        }
    }
    return same_warp < cfg_.high_slots_per_warp;
}

void AssistController::tick(uint64_t now) {
    // Gather starved low-priority entries first: completion callbacks may
    // allocate fresh entries, which this sweep must not touch.
    std::vector<std::pair<size_t, uint32_t>> starved;
    for (size_t i = 0; i < table_.size(); ++i) {
        if (table_[i] && table_[i]->priority == Priority::Low &&
            now - table_[i]->deployed_at >= cfg_.low_priority_timeout) {
            starved.emplace_back(i, table_[i]->id);
        }
    }
    for (auto [i, id] : starved) {
        if (table_[i] && table_[i]->id == id) remove_slot(i, true);
    }

    uint32_t budget = cfg_.assist_decode_per_cycle;
    size_t n = table_.size();
    for (size_t step = 0; step < n && budget > 0; ++step) {
        size_t i = (decode_rr_ + step) % n;
        if (table_[i] && table_[i]->state == AssistState::Deploying &&
            can_activate(*table_[i])) {
            AssistEntry& e = *table_[i];
            e.engine = std::make_unique<MicroEngine>(lib_->at(e.sr_id), e.ws);
            e.state = AssistState::Active;
            budget--;
            decode_rr_ = static_cast<uint32_t>((i + 1) % n);
        }
    }
}

void AssistController::observe_issue(uint32_t active_slots, uint32_t total_slots) {
    window_active_ += active_slots;
    window_total_ += total_slots;
    if (++window_cycles_ >= cfg_.throttle_window) {
        double util = window_total_ == 0
                          ? 0.0
                          : static_cast<double>(window_active_) / static_cast<double>(window_total_);
        throttled_ = util >= cfg_.throttle_threshold;
        window_active_ = window_total_ = window_cycles_ = 0;
    }
}

std::vector<AssistEntry*> AssistController::active_entries() {
    std::vector<AssistEntry*> out;
    for (auto& slot : table_) {
        if (slot && slot->state == AssistState::Active) out.push_back(&*slot);
    }
    return out;
}

void AssistController::finish(AssistEntry& e) {
    if (!e.engine || !e.engine->done()) {
        throw SimFault("finish() on an assist that has not exited");
    }
    counters_.completed++;
    remove_slot(static_cast<size_t>(slot_of(e)), false);
}

void AssistController::kill_line(uint64_t line) {
    std::vector<std::pair<size_t, uint32_t>> victims;
    for (size_t i = 0; i < table_.size(); ++i) {
        if (table_[i] && table_[i]->line == line) victims.emplace_back(i, table_[i]->id);
    }
    for (auto [i, id] : victims) {
        if (table_[i] && table_[i]->id == id) remove_slot(i, true);
    }
}

void AssistController::kill_all() {
    std::vector<std::pair<size_t, uint32_t>> victims;
    for (size_t i = 0; i < table_.size(); ++i) {
        if (table_[i]) victims.emplace_back(i, table_[i]->id);
    }
    for (auto [i, id] : victims) {
        if (table_[i] && table_[i]->id == id) remove_slot(i, true);
    }
}

int AssistController::slot_of(const AssistEntry& e) const {
    for (size_t i = 0; i < table_.size(); ++i) {
        if (table_[i] && &*table_[i] == &e) return static_cast<int>(i);
    }
    return -1;
}

// The entry leaves the table before the handler runs so a chained trigger
// fired from inside the handler sees the line and the slot as free. The
// moved-out entry keeps its engine and register state; only further
// stepping would touch the stale workspace, and finished engines never step.
void AssistController::remove_slot(size_t slot, bool killed) {
    AssistEntry tmp = std::move(*table_[slot]);
    table_[slot].reset();
    if (killed) counters_.killed++;
    if (on_done_) on_done_(tmp, killed);
}

bool AssistController::line_busy(uint64_t line) const {
    for (const auto& slot : table_) {
        if (slot && slot->line == line) return true;
    }
    return false;
}

size_t AssistController::live() const {
    size_t k = 0;
    for (const auto& slot : table_) k += slot.has_value() ? 1 : 0;
    return k;
}

size_t AssistController::live_low_active() const {
    size_t k = 0;
    for (const auto& slot : table_) {
        if (slot && slot->state == AssistState::Active && slot->priority == Priority::Low) k++;
    }
    return k;
}

} // namespace caba
