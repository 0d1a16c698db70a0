#include "caba/engine.hpp"

#include <bit>

#include "caba/bits.hpp"

namespace caba {
namespace {

int first_active(uint32_t mask) {
    return mask ? std::countr_zero(mask) : -1;
}

[[noreturn]] void fault(const Subroutine& s, uint32_t pc, const std::string& what) {
    throw SimFault(s.name + " @" + std::to_string(pc) + ": " + what);
}

} // namespace

MicroEngine::MicroEngine(const Subroutine& sub, AssistWorkspace& ws)
    : sub_(&sub), ws_(&ws), regs_(size_t(sub.register_requirement) * kLanes, 0) {}

const MicroOp& MicroEngine::current() const {
    if (done_ || pc_ >= sub_->ops.size())
        fault(*sub_, pc_, "no current instruction");
    return sub_->ops[pc_];
}

uint64_t MicroEngine::reg(uint32_t r, uint32_t lane) const {
    if (r >= sub_->register_requirement || lane >= kLanes)
        fault(*sub_, pc_, "register read out of range");
    return regs_[size_t(r) * kLanes + lane];
}

std::vector<uint64_t> MicroEngine::live_out() const {
    std::vector<uint64_t> out;
    for (uint8_t r : sub_->live_out_regs)
        out.push_back(reg(r, 0));
    return out;
}

uint32_t MicroEngine::effective_mask() const {
    return (has_override_ ? override_mask_ : 0xFFFFFFFFu) & sub_->base_mask;
}

uint64_t MicroEngine::operand_value(const Operand& o, uint32_t lane) const {
    switch (o.kind) {
    case OperandKind::Reg:
        return reg(uint32_t(o.value), lane);
    case OperandKind::Imm:
        return uint64_t(o.value);
    case OperandKind::LiveIn:
        if (o.value < 0 || size_t(o.value) >= ws_->live_in.size())
            fault(*sub_, pc_, "live-in slot not staged");
        return ws_->live_in[size_t(o.value)];
    case OperandKind::None:
        break;
    }
    fault(*sub_, pc_, "missing operand");
}

uint64_t MicroEngine::load(bool from_out, uint64_t offset, const Mode& m) const {
    const std::vector<uint8_t>& buf = from_out ? ws_->out : ws_->in;
    if (m.unit_bits) {
        if (offset + m.width > uint64_t(buf.size()) * 8)
            fault(*sub_, pc_, "bit load past the staged line");
        return load_bits(buf, size_t(offset), m.width);
    }
    if (m.width == 0 || m.width > 8 || offset + m.width > buf.size())
        fault(*sub_, pc_, "load past the staged line");
    const uint64_t v = load_le(buf, size_t(offset), m.width);
    return m.sign_ext ? uint64_t(sign_extend(v, m.width)) : v;
}

StepOutcome MicroEngine::step() {
    if (done_)
        fault(*sub_, pc_, "stepping a finished routine");
    if (pc_ >= sub_->ops.size())
        fault(*sub_, pc_, "fell off the end");
    const MicroOp op = sub_->ops[pc_];
    const Mode m = op.mode();
    const uint32_t mask = effective_mask();
    StepOutcome out;
    uint32_t next = pc_ + 1;
    bool keep_override = false;

    auto for_active = [&](auto&& fn) {
        for (uint32_t lane = 0; lane < kLanes; ++lane)
            if (mask & (1u << lane))
                fn(lane);
    };
    auto wr = [&](uint32_t lane, uint64_t v) {
        regs_[size_t(op.a.value) * kLanes + lane] = v;
    };

    switch (op.op) {
    case Opcode::MOVE:
        if (m.sel == kMoveFirstActive) {
            const int src_lane = first_active(mask);
            if (src_lane < 0)
                fault(*sub_, pc_, "first-active move with no active lanes");
            const uint64_t v = operand_value(op.b, uint32_t(src_lane));
            for (uint32_t lane = 0; lane < kLanes; ++lane)
                wr(lane, v);
        } else {
            for_active([&](uint32_t lane) { wr(lane, operand_value(op.b, lane)); });
        }
        break;
    case Opcode::LDW: {
        const int src_lane = first_active(mask);
        if (src_lane >= 0) {
            const uint64_t ofs = operand_value(op.b, uint32_t(src_lane));
            const uint64_t v = load(m.sel == kLoadFromOut, ofs, m);
            for_active([&](uint32_t lane) { wr(lane, v); });
        }
        break;
    }
    case Opcode::LDC:
        for_active([&](uint32_t lane) {
            const uint64_t ofs = operand_value(op.b, lane) + uint64_t(m.stride) * lane;
            wr(lane, load(m.sel == kLoadFromOut, ofs, m));
        });
        break;
    case Opcode::STW:
        for_active([&](uint32_t lane) {
            const uint64_t ofs = operand_value(op.b, lane) + uint64_t(m.stride) * lane;
            const uint64_t v = operand_value(op.a, lane);
            if (m.unit_bits) {
                if (ofs + m.width > uint64_t(ws_->out.size()) * 8)
                    fault(*sub_, pc_, "bit store past the output buffer");
                store_bits(ws_->out, size_t(ofs), m.width, v);
            } else {
                if (m.width == 0 || m.width > 8 || ofs + m.width > ws_->out.size())
                    fault(*sub_, pc_, "store past the output buffer");
                store_le(ws_->out, size_t(ofs), m.width, v);
            }
        });
        break;
    case Opcode::ADDI:
        for_active([&](uint32_t lane) {
            wr(lane, operand_value(op.b, lane) + uint64_t(op.c.value));
        });
        break;
    case Opcode::ADD:
        for_active([&](uint32_t lane) {
            wr(lane, operand_value(op.b, lane) + operand_value(op.c, lane));
        });
        break;
    case Opcode::SUB:
        for_active([&](uint32_t lane) {
            wr(lane, operand_value(op.b, lane) - operand_value(op.c, lane));
        });
        break;
    case Opcode::CMP_FITS:
        for_active([&](uint32_t lane) {
            const uint64_t v = operand_value(op.b, lane);
            wr(lane, (m.sign_ext ? fits_signed(v, m.width) : fits_unsigned(v, m.width)) ? 1 : 0);
        });
        break;
    case Opcode::SETP:
        for_active([&](uint32_t lane) {
            wr(lane, operand_value(op.b, lane) == operand_value(op.c, lane) ? 1 : 0);
        });
        break;
    case Opcode::PAND_GLOBAL: {
        bool all = true;
        for_active([&](uint32_t lane) { all = all && operand_value(op.a, lane) != 0; });
        gpred_ = m.sel == kPandAccum ? (gpred_ && all) : all;
        break;
    }
    case Opcode::SETMASK: {
        uint32_t value = 0xFFFFFFFFu;
        switch (m.sel) {
        case kMaskAll:
            break;
        case kMaskImm:
            value = uint32_t(op.a.value);
            break;
        case kMaskHeader: {
            uint64_t bit_ofs;
            if (op.a.kind == OperandKind::Reg) {
                const int lane = first_active(sub_->base_mask);
                bit_ofs = reg(uint32_t(op.a.value), uint32_t(lane < 0 ? 0 : lane));
            } else {
                bit_ofs = uint64_t(op.a.value);
            }
            if (bit_ofs + m.width > uint64_t(ws_->in.size()) * 8)
                fault(*sub_, pc_, "header mask read past the staged line");
            value = uint32_t(load_bits(ws_->in, size_t(bit_ofs), m.width));
            break;
        }
        case kMaskPred:
        case kMaskPredInv: {
            uint32_t bits = 0;
            for (uint32_t lane = 0; lane < kLanes; ++lane)
                if (reg(uint32_t(op.a.value), lane) != 0)
                    bits |= 1u << lane;
            value = m.sel == kMaskPred ? bits : ~bits;
            break;
        }
        case kMaskGpred:
            value = gpred_ ? 0xFFFFFFFFu : 0;
            break;
        case kMaskGpredInv:
            value = gpred_ ? 0 : 0xFFFFFFFFu;
            break;
        default:
            fault(*sub_, pc_, "bad mask selector");
        }
        override_mask_ = value;
        has_override_ = true;
        keep_override = true;
        break;
    }
    case Opcode::BRA_P: {
        bool taken = false;
        switch (m.sel) {
        case kBraIfGpred: taken = gpred_; break;
        case kBraIfNotGpred: taken = !gpred_; break;
        case kBraAlways: taken = true; break;
        default: fault(*sub_, pc_, "bad branch condition");
        }
        if (taken) {
            if (op.a.kind != OperandKind::Imm || op.a.value < 0 ||
                size_t(op.a.value) >= sub_->ops.size())
                fault(*sub_, pc_, "branch target out of range");
            next = uint32_t(op.a.value);
            out.branch_taken = true;
        }
        break;
    }
    case Opcode::EXIT:
        done_ = true;
        out.exited = true;
        break;
    }

    if (!keep_override)
        has_override_ = false; // the mask override covers exactly one instruction
    pc_ = next;
    return out;
}

size_t run_subroutine(MicroEngine& eng, size_t max_ops) {
    size_t n = 0;
    while (!eng.done()) {
        if (++n > max_ops)
            throw SimFault(eng.routine().name + ": op budget exceeded");
        eng.step();
    }
    return n;
}

} // namespace caba
