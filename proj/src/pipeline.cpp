#include "caba/pipeline.hpp"

#include <algorithm>
#include <cstdio>

namespace caba {

namespace {

const char* op_name(Opcode op) {
    switch (op) {
    case Opcode::MOVE: return "move";
    case Opcode::LDW: return "ldw";
    case Opcode::LDC: return "ldc";
    case Opcode::STW: return "stw";
    case Opcode::ADDI: return "addi";
    case Opcode::ADD: return "add";
    case Opcode::SUB: return "sub";
    case Opcode::CMP_FITS: return "cmpf";
    case Opcode::SETP: return "setp";
    case Opcode::PAND_GLOBAL: return "pand";
    case Opcode::SETMASK: return "setmask";
    case Opcode::BRA_P: return "bra";
    case Opcode::EXIT: return "exit";
    }
    return "?";
}

std::string fmt(const char* pattern, unsigned long a, const char* b) {
    char buf[48];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

} // namespace

Pipeline::Pipeline(const PipeConfig& cfg, MemoryBackend& mem, AssistController* awc)
    : cfg_(cfg), mem_(&mem), awc_(awc), warps_(cfg.warps_per_sm),
      greedy_(cfg.issue_width, -1), events_(cfg.issue_width) {}

void Pipeline::load_program(std::vector<TraceOp> ops) {
    for (const auto& op : ops) {
        if (op.warp >= warps_.size())
            throw std::out_of_range("trace names warp " + std::to_string(op.warp) +
                                    " but only " + std::to_string(warps_.size()) +
                                    " exist");
        warps_[op.warp].prog.push_back(op);
    }
}

bool Pipeline::parents_done() const {
    for (const auto& w : warps_)
        if (w.pc < w.prog.size() || w.outstanding_loads > 0)
            return false;
    return true;
}

void Pipeline::raise(Why& agg, Why w) {
    // Attribution precedence: memory over compute over data dependence.
    auto rank = [](Why x) {
        switch (x) {
        case Why::Memory: return 3;
        case Why::Compute: return 2;
        case Why::Dependence: return 1;
        case Why::None: return 0;
        }
        return 0;
    };
    if (rank(w) > rank(agg))
        agg = w;
}

bool Pipeline::issue_parent(Warp& w, uint64_t now, RunMetrics& m, Why& why) {
    const TraceOp& op = w.prog[w.pc];
    if (w.busy_until > now) { // previous ALU op still executing, in-order
        why = Why::Compute;
        return false;
    }
    switch (op.kind) {
    case OpKind::Load: {
        MemStall st = mem_->try_load(op.warp, op.addr, op.size, now);
        if (st != MemStall::Accepted) {
            why = Why::Memory;
            return false;
        }
        w.outstanding_loads++;
        break;
    }
    case OpKind::Store: {
        if (w.outstanding_loads > 0) { // store data may depend on loads in flight
            why = Why::Memory;
            return false;
        }
        MemStall st = mem_->try_store(op.warp, op.addr, op.size, now);
        if (st != MemStall::Accepted) {
            why = Why::Memory;
            return false;
        }
        break;
    }
    case OpKind::Alu:
        if (w.outstanding_loads > 0) { // operands may still be in flight
            why = Why::Memory;
            return false;
        }
        w.busy_until = now + cfg_.alu_latency;
        break;
    }
    w.pc++;
    w.last_issue = now;
    m.parent_instructions++;
    return true;
}

bool Pipeline::issue_assist(AssistEntry& e, uint64_t now, RunMetrics& m, Why& why) {
    const MicroOp& op = e.engine->current();
    OpInfo info = classify(op);

    if (op.op == Opcode::EXIT) {
        e.mem_done.erase(std::remove_if(e.mem_done.begin(), e.mem_done.end(),
                                        [&](uint64_t t) { return t <= now; }),
                         e.mem_done.end());
        if (!e.mem_done.empty()) { // exit drains the routine's memory ops
            why = Why::Memory;
            return false;
        }
    } else {
        bool blocked = false, on_mem = false;
        for (int8_t r : info.reads) {
            if (r >= 0 && e.reg_ready[size_t(r)] > now) {
                blocked = true;
                on_mem |= e.reg_from_mem[size_t(r)] != 0;
            }
        }
        if (info.reads_gpred && e.gpred_ready > now)
            blocked = true; // predicate producers are ALU-class
        if (blocked) {
            why = on_mem ? Why::Memory : Why::Dependence;
            return false;
        }
    }

    StepOutcome out = e.engine->step();
    m.assist_instructions++;
    if (info.is_load || info.is_store)
        e.mem_done.push_back(now + cfg_.assist_mem_latency);
    uint64_t lat = info.is_load ? cfg_.assist_mem_latency : cfg_.alu_latency;
    if (info.writes >= 0) {
        auto w = size_t(info.writes);
        e.reg_ready[w] = std::max(e.reg_ready[w], now + lat);
        e.reg_from_mem[w] = info.is_load ? 1 : 0;
    }
    if (info.writes_gpred)
        e.gpred_ready = std::max(e.gpred_ready, now + cfg_.alu_latency);
    if (out.exited)
        awc_->finish(e); // completion handler runs now; entry is gone after
    return true;
}

void Pipeline::cycle(uint64_t now, RunMetrics& m) {
    issued_last_ = 0;
    for (auto& ev : events_)
        ev = SlotEvent{};

    for (uint32_t s = 0; s < cfg_.issue_width; ++s) {
        Why agg = Why::None;
        SlotEvent& ev = events_[s];

        auto try_assists = [&](Priority pr) -> bool {
            if (!awc_)
                return false;
            auto entries = awc_->active_entries();
            std::vector<AssistEntry*> mine;
            for (auto* e : entries)
                if (e->priority == pr && e->parent_warp % cfg_.issue_width == s)
                    mine.push_back(e);
            std::sort(mine.begin(), mine.end(),
                      [](const AssistEntry* a, const AssistEntry* b) { return a->id < b->id; });
            for (auto* e : mine) {
                Why why = Why::None;
                uint32_t id = e->id, warp = e->parent_warp;
                const char* name = op_name(e->engine->current().op);
                if (issue_assist(*e, now, m, why)) { // may destroy *e via finish
                    ev = {true, true, warp, id, fmt("aw%lu.%s", id, name)};
                    return true;
                }
                raise(agg, why);
            }
            return false;
        };

        auto try_parents = [&]() -> bool {
            std::vector<uint32_t> order;
            for (uint32_t w = s; w < warps_.size(); w += cfg_.issue_width)
                if (warps_[w].pc < warps_[w].prog.size())
                    order.push_back(w);
            std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
                return warps_[a].last_issue != warps_[b].last_issue
                           ? warps_[a].last_issue < warps_[b].last_issue
                           : a < b;
            });
            // Greedy-then-oldest: the warp that issued here last goes first.
            if (greedy_[s] >= 0) {
                auto it = std::find(order.begin(), order.end(), uint32_t(greedy_[s]));
                if (it != order.end()) {
                    order.erase(it);
                    order.insert(order.begin(), uint32_t(greedy_[s]));
                }
            }
            for (uint32_t wi : order) {
                Why why = Why::None;
                const char* name = to_string(warps_[wi].prog[warps_[wi].pc].kind);
                if (issue_parent(warps_[wi], now, m, why)) {
                    greedy_[s] = int(wi);
                    ev = {true, false, wi, 0, fmt("w%02lu.%s", wi, name)};
                    return true;
                }
                raise(agg, why);
            }
            return false;
        };

        bool issued = try_assists(Priority::High) || try_parents() ||
                      try_assists(Priority::Low);
        if (issued) {
            issued_last_++;
            m.breakdown.active++;
        } else {
            switch (agg) {
            case Why::Memory: m.breakdown.memory++; ev.text = "stall:mem"; break;
            case Why::Compute: m.breakdown.compute++; ev.text = "stall:cmp"; break;
            case Why::Dependence: m.breakdown.data_dependence++; ev.text = "stall:dep"; break;
            case Why::None: m.breakdown.idle++; ev.text = "idle"; break;
            }
        }
    }
}

void Pipeline::load_done(uint32_t warp) {
    if (warps_[warp].outstanding_loads == 0)
        throw std::logic_error("load completion for warp with none outstanding");
    warps_[warp].outstanding_loads--;
}

} // namespace caba
