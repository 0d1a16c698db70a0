#include <doctest.h>

#include <optional>
#include <random>

#include "caba/codec.hpp"
#include "caba/pipeline.hpp"
#include "test_util.hpp"

using namespace caba;

namespace {

struct MockMem : MemoryBackend {
    uint32_t load_latency = 10;
    size_t queue_cap = SIZE_MAX;
    bool accept_stores = true;
    uint64_t loads = 0, stores = 0;
    std::vector<std::pair<uint64_t, uint32_t>> pending; // (done_at, warp)

    MemStall try_load(uint32_t warp, uint64_t, uint32_t, uint64_t now) override {
        if (pending.size() >= queue_cap)
            return MemStall::QueueFull;
        loads++;
        pending.emplace_back(now + load_latency, warp);
        return MemStall::Accepted;
    }
    MemStall try_store(uint32_t, uint64_t, uint32_t, uint64_t) override {
        if (!accept_stores)
            return MemStall::BufferFull;
        stores++;
        return MemStall::Accepted;
    }
    void deliver(uint64_t now, Pipeline& p) {
        for (auto it = pending.begin(); it != pending.end();) {
            if (it->first <= now) {
                p.load_done(it->second);
                it = pending.erase(it);
            } else {
                ++it;
            }
        }
    }
};

struct Rig {
    PipeConfig pc;
    MockMem mem;
    CodecConfig codec;
    SubroutineLibrary lib;
    std::optional<AssistController> awc;
    std::optional<Pipeline> pipe;
    RunMetrics m;
    uint64_t now = 0;
    std::vector<std::string> slot0_log;

    explicit Rig(bool with_awc = false, uint32_t warps = 8) {
        pc.warps_per_sm = warps;
        if (with_awc) {
            lib = build_library(codec);
            AwcConfig ac;
            ac.awt_entries = warps;
            awc.emplace(ac, lib);
        }
    }
    void start(std::vector<TraceOp> ops) {
        pipe.emplace(pc, mem, awc ? &*awc : nullptr);
        pipe->load_program(std::move(ops));
    }
    void step() {
        mem.deliver(now, *pipe);
        if (awc)
            awc->tick(now);
        pipe->cycle(now, m);
        slot0_log.push_back(pipe->slot_events()[0].text);
        now++;
    }
    void run_until_done(uint64_t cap = 100000) {
        while (!(pipe->parents_done() && mem.pending.empty() &&
                 (!awc || awc->live() == 0))) {
            REQUIRE(now < cap);
            step();
        }
    }
};

std::vector<TraceOp> repeat_ops(uint32_t warp, OpKind k, int n, uint64_t addr = 0x1000,
                                uint32_t size = 32) {
    std::vector<TraceOp> v;
    for (int i = 0; i < n; ++i)
        v.push_back({warp, k, k == OpKind::Alu ? 0 : addr + uint64_t(i) * size,
                     k == OpKind::Alu ? 0u : size});
    return v;
}

} // namespace

TEST_CASE("a lone warp issues one op per cycle on its parity slot") {
    Rig r;
    r.start(repeat_ops(0, OpKind::Alu, 10));
    r.run_until_done();
    CHECK(r.now == 10);
    CHECK(r.m.parent_instructions == 10);
    CHECK(r.m.breakdown.active == 10);
    CHECK(r.m.breakdown.idle == 10); // the odd-parity slot had nothing
    CHECK(r.m.breakdown.total() == r.now * r.pc.issue_width);
}

TEST_CASE("multi-cycle ALU ops serialize a warp and count as compute stalls") {
    Rig r;
    r.pc.alu_latency = 3;
    r.start(repeat_ops(0, OpKind::Alu, 3));
    r.run_until_done();
    CHECK(r.now == 7); // issues at 0, 3, 6
    CHECK(r.m.breakdown.active == 3);
    CHECK(r.m.breakdown.compute == 4);
}

TEST_CASE("ALU and store ops wait for the warp's outstanding loads") {
    Rig r;
    std::vector<TraceOp> ops = {{0, OpKind::Load, 0x100, 32}, {0, OpKind::Alu, 0, 0},
                                {0, OpKind::Store, 0x200, 32}};
    r.start(ops);
    r.run_until_done();
    // Load at 0, completion delivered at 10, ALU at 10, store at 11.
    CHECK(r.now == 12);
    CHECK(r.m.breakdown.active == 3);
    CHECK(r.m.breakdown.memory == 9);
    CHECK(r.mem.stores == 1);
}

TEST_CASE("loads overlap until the memory queue backs up") {
    Rig r;
    r.mem.queue_cap = 2;
    r.start(repeat_ops(0, OpKind::Load, 4));
    r.run_until_done();
    CHECK(r.mem.loads == 4);
    // 0 and 1 issue back to back; 2 waits for the first completion at 10,
    // 3 follows at 11 once the second completes.
    CHECK(r.slot0_log[0] == "w00.ld");
    CHECK(r.slot0_log[1] == "w00.ld");
    CHECK(r.slot0_log[2] == "stall:mem");
    CHECK(r.slot0_log[10] == "w00.ld");
    CHECK(r.slot0_log[11] == "w00.ld");
    CHECK(r.m.breakdown.memory == 8);
}

TEST_CASE("greedy-then-oldest switches warps only on a stall") {
    Rig r;
    r.mem.load_latency = 20;
    std::vector<TraceOp> ops;
    for (auto& op : std::vector<TraceOp>{{0, OpKind::Alu, 0, 0},
                                         {0, OpKind::Load, 0x100, 32},
                                         {0, OpKind::Alu, 0, 0}})
        ops.push_back(op);
    for (auto& op : repeat_ops(2, OpKind::Alu, 3))
        ops.push_back(op);
    r.start(ops);
    r.run_until_done();

    std::vector<std::string> want = {"w00.alu", "w00.ld", "w02.alu", "w02.alu",
                                     "w02.alu"};
    REQUIRE(r.slot0_log.size() == 22);
    for (size_t i = 0; i < want.size(); ++i)
        CHECK(r.slot0_log[i] == want[i]);
    for (size_t i = 5; i < 21; ++i)
        CHECK(r.slot0_log[i] == "stall:mem");
    CHECK(r.slot0_log[21] == "w00.alu");
}

TEST_CASE("a high-priority assist leads its slot and stall gaps go to the parent") {
    Rig r(true);
    std::mt19937_64 rng(5);
    auto raw = testutil::low_dynamic_range_line(rng, r.codec.line_size);
    CompressedLine c = bdi_compress(raw, r.codec);
    REQUIRE(c.encoding == uint8_t(BdiKind::B8D1));

    std::vector<uint8_t> out_line;
    r.awc->set_completion_handler([&](AssistEntry& e, bool killed) {
        REQUIRE_FALSE(killed);
        out_line = e.ws.out;
    });
    r.start(repeat_ops(0, OpKind::Alu, 20));

    Trigger t{TriggerKind::CompressedFill, 7, encoding_id(c.algorithm, c.encoding),
              Algorithm::NONE};
    REQUIRE(r.awc->fire(t, c.data, {0x1000, c.total_size()}, r.codec.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);

    for (int i = 0; i < 12; ++i)
        r.step();
    std::vector<std::string> want = {
        "aw1.move", "aw1.ldw", "aw1.ldc", "aw1.setmask", "w00.alu", "w00.alu",
        "aw1.add",  "aw1.stw", "w00.alu", "w00.alu",     "w00.alu", "aw1.exit",
    };
    CHECK(r.slot0_log == want);
    CHECK(out_line == raw);
    CHECK(r.awc->live() == 0);
    CHECK(r.m.assist_instructions == 7);
    r.run_until_done();
    CHECK(r.m.parent_instructions == 20);
}

TEST_CASE("a low-priority assist only gets cycles the parent leaves behind") {
    Rig r(true);
    std::mt19937_64 rng(9);
    auto raw = testutil::low_dynamic_range_line(rng, r.codec.line_size);

    bool completed = false;
    r.awc->set_completion_handler([&](AssistEntry& e, bool killed) {
        completed = true;
        CHECK_FALSE(killed);
        CHECK(e.priority == Priority::Low);
    });
    r.start(repeat_ops(0, OpKind::Alu, 20));

    Trigger t;
    t.kind = TriggerKind::StoreEligible;
    t.line = 3;
    t.algorithm = Algorithm::BDI;
    REQUIRE(r.awc->fire(t, raw, {0x1000}, r.codec.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);

    for (int i = 0; i < 20; ++i)
        r.step();
    CHECK(r.m.parent_instructions == 20);
    CHECK(r.m.assist_instructions == 0); // parent never stalled
    r.run_until_done();
    CHECK(completed);
    CHECK(r.m.assist_instructions > 0);
}

TEST_CASE("assist stalls are attributed to their producer class") {
    // ALU producer: expect data-dependence stalls.
    Rig r;
    r.pc.alu_latency = 4;
    Subroutine sub;
    sub.name = "test.dep";
    sub.algorithm = Algorithm::BDI;
    sub.encoding = uint8_t(BdiKind::Zeros);
    sub.direction = Direction::Decompress;
    sub.priority = Priority::High;
    sub.register_requirement = 3;
    sub.base_mask = 1;
    Mode plain;
    plain.sel = kMovePlain;
    sub.ops = {
        {Opcode::MOVE, Operand::reg(1), Operand::imm(5), Operand::imm(plain.pack())},
        {Opcode::ADD, Operand::reg(2), Operand::reg(1), Operand::reg(1)},
        {Opcode::EXIT, {}, {}, {}},
    };
    r.lib.add(sub);
    AwcConfig ac;
    ac.awt_entries = 4;
    r.awc.emplace(ac, r.lib);
    r.start({});

    Trigger t{TriggerKind::CompressedFill, 1, encoding_id(Algorithm::BDI, 0),
              Algorithm::NONE};
    REQUIRE(r.awc->fire(t, {0}, {}, r.codec.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);
    while (r.awc->live() > 0) {
        REQUIRE(r.now < 100);
        r.step();
    }
    // move at 0; add waits for r1 until 4; exit at 5.
    CHECK(r.m.breakdown.data_dependence == 3);
    CHECK(r.slot0_log[1] == "stall:dep");
    CHECK(r.m.breakdown.memory == 0);

    // Memory producer: the same shape behind a load stalls as memory.
    Rig r2(true);
    std::mt19937_64 rng(5);
    auto raw = testutil::low_dynamic_range_line(rng, r2.codec.line_size);
    CompressedLine c = bdi_compress(raw, r2.codec);
    r2.start({});
    Trigger t2{TriggerKind::CompressedFill, 2, encoding_id(c.algorithm, c.encoding),
               Algorithm::NONE};
    REQUIRE(r2.awc->fire(t2, c.data, {0x1000, c.total_size()}, r2.codec.line_size, 0,
                         0) == AssistController::FireResult::Deployed);
    while (r2.awc->live() > 0) {
        REQUIRE(r2.now < 100);
        r2.step();
    }
    CHECK(r2.m.breakdown.memory > 0);
    CHECK(r2.slot0_log[4] == "stall:mem"); // add waits on both loads
    CHECK(r2.m.breakdown.data_dependence == 0);
}

TEST_CASE("store-buffer pressure stalls stores and is charged to memory") {
    Rig r;
    r.mem.accept_stores = false;
    r.start(repeat_ops(0, OpKind::Store, 2));
    for (int i = 0; i < 4; ++i)
        r.step();
    CHECK(r.m.breakdown.memory == 4);
    r.mem.accept_stores = true;
    r.run_until_done();
    CHECK(r.now == 6);
    CHECK(r.mem.stores == 2);
}

TEST_CASE("slot accounting partitions every cycle across all buckets") {
    Rig r;
    std::mt19937_64 rng(77);
    r.mem.load_latency = 7;
    r.mem.queue_cap = 3;
    std::vector<TraceOp> ops;
    for (uint32_t w = 0; w < 8; ++w) {
        for (int i = 0; i < 40; ++i) {
            uint32_t roll = uint32_t(rng() % 3);
            OpKind k = roll == 0 ? OpKind::Load : roll == 1 ? OpKind::Store : OpKind::Alu;
            ops.push_back({w, k, (rng() % 64) * 32, 32});
        }
    }
    r.start(ops);
    while (!(r.pipe->parents_done() && r.mem.pending.empty())) {
        REQUIRE(r.now < 10000);
        r.step();
        CHECK(r.m.breakdown.total() == r.now * r.pc.issue_width);
    }
    CHECK(r.m.parent_instructions == 8 * 40);
}
