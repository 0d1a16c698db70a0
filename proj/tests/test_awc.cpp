#include <doctest.h>

#include <random>

#include "caba/awc.hpp"
#include "caba/codec.hpp"
#include "test_util.hpp"

using namespace caba;

namespace {

struct Rig {
    CodecConfig cfg;
    SubroutineLibrary lib;
    AwcConfig ac;

    explicit Rig(uint32_t awt = 8) {
        lib = build_library(cfg);
        ac.awt_entries = awt;
    }

    AssistController make() { return AssistController(ac, lib); }

    // Staged inputs for a decompression trigger carrying a real stored line.
    struct Fill {
        Trigger t;
        std::vector<uint8_t> staged;
        std::vector<uint64_t> live_in;
        std::vector<uint8_t> raw;
    };

    Fill make_fill(uint64_t line_index, std::mt19937_64& rng) {
        Fill f;
        f.raw = testutil::low_dynamic_range_line(rng, cfg.line_size);
        CompressedLine c = bdi_compress(f.raw, cfg);
        REQUIRE(c.compressed());
        f.t.kind = TriggerKind::CompressedFill;
        f.t.line = line_index;
        f.t.encoding = encoding_id(c.algorithm, c.encoding);
        f.staged = c.data;
        f.live_in = {0x1000, c.total_size()};
        return f;
    }

    Trigger make_store(uint64_t line_index, Algorithm alg = Algorithm::BDI) {
        Trigger t;
        t.kind = TriggerKind::StoreEligible;
        t.line = line_index;
        t.algorithm = alg;
        return t;
    }
};

void run_entry(AssistController& c, AssistEntry& e) {
    run_subroutine(*e.engine);
    c.finish(e);
}

} // namespace

TEST_CASE("trigger deployment, rejection, and handler lookup") {
    Rig rig(4);
    auto c = rig.make();
    std::mt19937_64 rng(7);

    for (uint64_t i = 0; i < 4; ++i) {
        auto f = rig.make_fill(i, rng);
        CHECK(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, 0, 0) ==
              AssistController::FireResult::Deployed);
    }
    CHECK(c.live() == 4);

    // Same line again: an assist is already bound to it.
    auto dup = rig.make_fill(2, rng);
    CHECK(c.fire(dup.t, dup.staged, dup.live_in, rig.cfg.line_size, 0, 0) ==
          AssistController::FireResult::RejectedBusy);

    // Table exhausted.
    auto extra = rig.make_fill(9, rng);
    CHECK(c.fire(extra.t, extra.staged, extra.live_in, rig.cfg.line_size, 0, 0) ==
          AssistController::FireResult::RejectedFull);

    // No handler: custom triggers, raw fills, and unconfigured stores leave
    // the counters untouched.
    Trigger custom{TriggerKind::Custom, 20, 0, Algorithm::NONE};
    CHECK(c.fire(custom, {}, {}, rig.cfg.line_size, 0, 0) ==
          AssistController::FireResult::NoHandler);
    Trigger raw_fill{TriggerKind::CompressedFill, 21, 0, Algorithm::NONE};
    CHECK(c.fire(raw_fill, {}, {}, rig.cfg.line_size, 0, 0) ==
          AssistController::FireResult::NoHandler);
    CHECK(c.fire(rig.make_store(22, Algorithm::NONE), {}, {}, rig.cfg.line_size, 0, 0) ==
          AssistController::FireResult::NoHandler);

    const auto& k = c.counters();
    CHECK(k.attempts == 6);
    CHECK(k.deployed == 4);
    CHECK(k.rejected_busy == 1);
    CHECK(k.rejected_full == 1);
    CHECK(k.attempts == k.deployed + k.rejected_busy + k.rejected_full);
}

TEST_CASE("deployment decodes at one assist per cycle") {
    Rig rig;
    auto c = rig.make();
    std::mt19937_64 rng(11);

    for (uint64_t i = 0; i < 3; ++i) {
        auto f = rig.make_fill(i, rng);
        // Distinct parent warps so overlay slots never bind.
        REQUIRE(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, uint32_t(i), 0) ==
                AssistController::FireResult::Deployed);
    }
    CHECK(c.active_entries().empty());
    for (size_t k = 1; k <= 3; ++k) {
        c.tick(k);
        CHECK(c.active_entries().size() == k);
    }
    c.tick(4);
    CHECK(c.active_entries().size() == 3);
}

TEST_CASE("high-priority assists respect the parent's overlay slots") {
    Rig rig;
    auto c = rig.make();
    std::mt19937_64 rng(13);

    for (uint64_t i = 0; i < 3; ++i) {
        auto f = rig.make_fill(i, rng);
        REQUIRE(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, /*warp=*/5, 0) ==
                AssistController::FireResult::Deployed);
    }
    for (uint64_t t = 1; t <= 6; ++t) c.tick(t);
    CHECK(c.active_entries().size() == 2); // third waits for an overlay slot

    run_entry(c, *c.active_entries()[0]);
    c.tick(7);
    CHECK(c.active_entries().size() == 2);
    CHECK(c.live() == 2);
}

TEST_CASE("low-priority assists respect the shared buffer partition") {
    Rig rig;
    auto c = rig.make();
    std::mt19937_64 rng(17);
    std::vector<std::vector<uint8_t>> raws;

    for (uint64_t i = 0; i < 3; ++i) {
        raws.push_back(testutil::low_dynamic_range_line(rng, rig.cfg.line_size));
        REQUIRE(c.fire(rig.make_store(i), raws.back(), {0x1000}, rig.cfg.line_size,
                       uint32_t(i), 0) == AssistController::FireResult::Deployed);
    }
    for (uint64_t t = 1; t <= 6; ++t) c.tick(t);
    CHECK(c.live_low_active() == 2);

    run_entry(c, *c.active_entries()[0]);
    CHECK(c.live_low_active() == 1);
    c.tick(7);
    CHECK(c.live_low_active() == 2);
}

TEST_CASE("completion hands back the routine's results") {
    Rig rig;
    auto c = rig.make();
    std::mt19937_64 rng(19);

    int calls = 0;
    std::vector<uint8_t> produced;
    bool was_killed = true;
    c.set_completion_handler([&](AssistEntry& e, bool killed) {
        calls++;
        was_killed = killed;
        produced.assign(e.ws.out.begin(), e.ws.out.end());
        CHECK(e.direction == Direction::Decompress);
    });

    auto f = rig.make_fill(3, rng);
    REQUIRE(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);
    c.tick(1);
    REQUIRE(c.active_entries().size() == 1);
    run_entry(c, *c.active_entries()[0]);

    CHECK(calls == 1);
    CHECK_FALSE(was_killed);
    CHECK(produced == f.raw);
    CHECK(c.live() == 0);
    CHECK_FALSE(c.line_busy(3));
    CHECK(c.counters().completed == 1);
}

TEST_CASE("kills flush entries and report through the handler") {
    Rig rig;
    auto c = rig.make();
    std::mt19937_64 rng(23);

    int kills = 0;
    c.set_completion_handler([&](AssistEntry&, bool killed) {
        if (killed) kills++;
    });

    auto a = rig.make_fill(1, rng);
    auto b = rig.make_fill(2, rng);
    REQUIRE(c.fire(a.t, a.staged, a.live_in, rig.cfg.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);
    REQUIRE(c.fire(b.t, b.staged, b.live_in, rig.cfg.line_size, 1, 0) ==
            AssistController::FireResult::Deployed);
    c.tick(1);

    c.kill_line(1);
    CHECK(kills == 1);
    CHECK_FALSE(c.line_busy(1));
    CHECK(c.live() == 1);

    c.kill_all();
    CHECK(kills == 2);
    CHECK(c.live() == 0);
    CHECK(c.counters().killed == 2);
    CHECK(c.counters().deployed ==
          c.counters().completed + c.counters().killed + c.live());
}

TEST_CASE("a handler may refire on the same line during a kill") {
    Rig rig;
    auto c = rig.make();
    std::mt19937_64 rng(29);
    auto f = rig.make_fill(4, rng);

    int refires = 0;
    c.set_completion_handler([&](AssistEntry& e, bool killed) {
        if (killed && refires == 0) {
            refires++;
            Trigger t{TriggerKind::CompressedFill, e.line, e.encoding, Algorithm::NONE};
            CHECK(c.fire(t, f.staged, f.live_in, rig.cfg.line_size, e.parent_warp, 1) ==
                  AssistController::FireResult::Deployed);
        }
    });

    REQUIRE(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);
    c.tick(1);
    c.kill_line(4);

    // The retry deployed from inside the handler must survive the sweep.
    CHECK(refires == 1);
    CHECK(c.live() == 1);
    CHECK(c.line_busy(4));
    c.tick(2);
    REQUIRE(c.active_entries().size() == 1);
    run_entry(c, *c.active_entries()[0]);
    CHECK(c.counters().completed == 1);
    CHECK(c.counters().killed == 1);
}

TEST_CASE("starved low-priority entries are reaped at the timeout") {
    Rig rig;
    rig.ac.low_priority_timeout = 50;
    auto c = rig.make();
    std::mt19937_64 rng(31);

    int kills = 0;
    c.set_completion_handler([&](AssistEntry& e, bool killed) {
        if (killed) {
            kills++;
            CHECK(e.priority == Priority::Low);
        }
    });

    auto raw = testutil::low_dynamic_range_line(rng, rig.cfg.line_size);
    REQUIRE(c.fire(rig.make_store(1), raw, {0x1000}, rig.cfg.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);
    auto f = rig.make_fill(2, rng);
    REQUIRE(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);

    for (uint64_t t = 1; t < 50; ++t) c.tick(t);
    CHECK(kills == 0);
    c.tick(50);
    CHECK(kills == 1);
    CHECK(c.live() == 1); // the high-priority fill is never timed out
}

TEST_CASE("issue-slot pressure parks low-priority deployment") {
    Rig rig;
    rig.ac.throttle_window = 10;
    auto c = rig.make();
    std::mt19937_64 rng(37);

    CHECK(c.low_deploy_enabled());
    // 9 busy slots of 10 sits exactly on the 0.9 threshold: throttled.
    for (int i = 0; i < 9; ++i) c.observe_issue(1, 1);
    c.observe_issue(0, 1);
    CHECK_FALSE(c.low_deploy_enabled());

    // Deployment is accepted but activation waits out the throttle.
    auto raw = testutil::low_dynamic_range_line(rng, rig.cfg.line_size);
    REQUIRE(c.fire(rig.make_store(1), raw, {0x1000}, rig.cfg.line_size, 0, 0) ==
            AssistController::FireResult::Deployed);
    for (uint64_t t = 1; t <= 5; ++t) c.tick(t);
    CHECK(c.active_entries().empty());

    // High-priority fills deploy regardless of the throttle.
    auto f = rig.make_fill(2, rng);
    REQUIRE(c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size, 0, 5) ==
            AssistController::FireResult::Deployed);
    c.tick(6);
    CHECK(c.active_entries().size() == 1);
    CHECK(c.active_entries()[0]->priority == Priority::High);

    // An idle window lifts the throttle and the parked entry activates.
    for (int i = 0; i < 10; ++i) c.observe_issue(0, 1);
    CHECK(c.low_deploy_enabled());
    c.tick(7);
    CHECK(c.active_entries().size() == 2);

    // 8 busy of 10 stays below the threshold.
    for (int i = 0; i < 8; ++i) c.observe_issue(1, 1);
    for (int i = 0; i < 2; ++i) c.observe_issue(0, 1);
    CHECK(c.low_deploy_enabled());
}

TEST_CASE("counter conservation holds through a randomized storm") {
    Rig rig(6);
    auto c = rig.make();
    std::mt19937_64 rng(41);

    c.set_completion_handler([](AssistEntry&, bool) {});
    uint64_t now = 0;
    for (int iter = 0; iter < 2000; ++iter) {
        now++;
        uint64_t line = rng() % 10;
        switch (rng() % 4) {
        case 0: {
            auto f = rig.make_fill(line, rng);
            c.fire(f.t, f.staged, f.live_in, rig.cfg.line_size,
                   uint32_t(rng() % 4), now);
            break;
        }
        case 1: {
            auto raw = testutil::random_line(rng, rig.cfg.line_size);
            c.fire(rig.make_store(line, Algorithm::FPC), raw, {0x1000},
                   rig.cfg.line_size, uint32_t(rng() % 4), now);
            break;
        }
        case 2:
            c.kill_line(line);
            break;
        case 3: {
            auto act = c.active_entries();
            if (!act.empty()) run_entry(c, *act[rng() % act.size()]);
            break;
        }
        }
        c.tick(now);
        const auto& k = c.counters();
        CHECK(k.attempts == k.deployed + k.rejected_busy + k.rejected_full);
        CHECK(k.deployed == k.completed + k.killed + c.live());
    }
    c.kill_all();
    const auto& k = c.counters();
    CHECK(k.deployed == k.completed + k.killed);
    CHECK(c.live() == 0);
}
