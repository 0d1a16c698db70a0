#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "caba/config.hpp"

using namespace caba;

TEST_CASE("config: defaults validate and files override them") {
    RunConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    CHECK(algorithm_name(cfg) == "none");

    std::istringstream in(R"(# a run description
label = demo
algorithm = bdi        # trailing comment
pattern  = random_mix
profile  = dictionary
warps = 12
ops_per_warp = 0x100
store_buffer_lines = 4
throttle_threshold = 0.75

seed = 99
)");
    RunConfig c = parse_config(in);
    CHECK(c.label == "demo");
    CHECK(c.sim.modes.algorithm == Algorithm::BDI);
    CHECK(algorithm_name(c) == "bdi");
    CHECK(c.workload.pattern == AccessPattern::RandomMix);
    CHECK(c.workload.profile == DataProfile::Dictionary);
    CHECK(c.workload.warps == 12);
    CHECK(c.workload.ops_per_warp == 256); // hex accepted
    CHECK(c.sim.mem.store_buffer_lines == 4);
    CHECK(c.sim.awc.throttle_threshold == doctest::Approx(0.75));
    CHECK(c.workload.seed == 99);
    CHECK_NOTHROW(validate(c));

    SUBCASE("mode names map onto the mode flags") {
        RunConfig m;
        apply_setting(m, "algorithm", "best");
        CHECK(m.sim.modes.best_of_all);
        CHECK(algorithm_name(m) == "best");
        apply_setting(m, "algorithm", "cpack");
        CHECK(!m.sim.modes.best_of_all);
        CHECK(m.sim.modes.algorithm == Algorithm::CPACK);
        apply_setting(m, "caba_absent", "true");
        CHECK(algorithm_name(m) == "absent");
    }
    SUBCASE("line_size steers codec and memory together") {
        RunConfig m;
        apply_setting(m, "line_size", "256");
        CHECK(m.sim.codec.line_size == 256);
        CHECK(m.sim.mem.line_size == 256);
    }
    SUBCASE("every advertised key is settable") {
        for (const std::string& key : config_keys()) {
            RunConfig m;
            if (key == "label")
                CHECK_NOTHROW(apply_setting(m, key, "x"));
            else if (key == "algorithm")
                CHECK_NOTHROW(apply_setting(m, key, "fpc"));
            else if (key == "pattern")
                CHECK_NOTHROW(apply_setting(m, key, "stream_store"));
            else if (key == "profile")
                CHECK_NOTHROW(apply_setting(m, key, "zeros"));
            else if (key == "throttle_threshold")
                CHECK_NOTHROW(apply_setting(m, key, "0.5"));
            else
                CHECK_NOTHROW(apply_setting(m, key, "1"));
        }
    }
}

TEST_CASE("config: malformed input is rejected with context") {
    RunConfig cfg;
    CHECK_THROWS_WITH_AS(apply_setting(cfg, "bogus_key", "1"),
                         doctest::Contains("unknown config key"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(apply_setting(cfg, "warps", "many"),
                         doctest::Contains("not a number"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(apply_setting(cfg, "warps", "12abc"),
                         doctest::Contains("trailing junk"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(apply_setting(cfg, "algorithm", "gzip"),
                         doctest::Contains("algorithm must be"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(apply_setting(cfg, "uncompressed_l2", "maybe"),
                         doctest::Contains("not a boolean"), std::invalid_argument);

    std::istringstream noeq("#cfg\nwarps 8\n");
    CHECK_THROWS_WITH_AS(parse_config(noeq), doctest::Contains("line 2"),
                         std::invalid_argument);
}

TEST_CASE("config: validation catches capacity and geometry errors") {
    auto expect_reject = [](const char* key, const char* value, const char* why) {
        RunConfig c;
        c.sim.modes.algorithm = Algorithm::BDI;
        apply_setting(c, key, value);
        CAPTURE(key);
        CHECK_THROWS_WITH_AS(validate(c), doctest::Contains(why),
                             std::invalid_argument);
    };

    expect_reject("line_size", "100", "multiple of 8");
    expect_reject("burst_size", "48", "divide line_size");
    expect_reject("l1_bytes", "1000", "l1_bytes must be");
    expect_reject("store_buffer_lines", "0", "store_buffer_lines");
    expect_reject("mem_queue_depth", "0", "mem_queue_depth");
    expect_reject("warps", "0", "between 1 and warps_per_sm");
    expect_reject("warps", "49", "between 1 and warps_per_sm");
    expect_reject("access_size", "33", "access_size must divide");
    expect_reject("awb_low_entries", "0", "awb_low_entries");
    expect_reject("high_slots_per_warp", "0", "high_slots_per_warp");
    expect_reject("throttle_threshold", "1.5", "throttle_threshold");
    expect_reject("max_cycles", "0", "max_cycles");

    SUBCASE("partitions must fit the modeled memory") {
        RunConfig c;
        apply_setting(c, "memory_bytes", "65536"); // 512 lines
        apply_setting(c, "lines_per_warp", "64");  // 8 warps x 64 = 512: fits
        CHECK_NOTHROW(validate(c));
        apply_setting(c, "base_line", "1"); // now one line over
        CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("exceed memory_bytes"),
                             std::invalid_argument);
    }

    SUBCASE("register budget: default fits, one extra parent register does not") {
        RunConfig c;
        c.sim.modes.algorithm = Algorithm::BDI;
        // 16 x 32 x 48 = 24576 parent + 48 x 16 = 768 assist of 32768
        CHECK_NOTHROW(validate(c));
        apply_setting(c, "parent_regs_per_thread", "21"); // 32256 + 768 > 32768
        CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("register file too small"),
                             std::invalid_argument);
        // without the assist machinery the same parents fit
        apply_setting(c, "parent_regs_per_thread", "21");
        apply_setting(c, "caba_absent", "1");
        CHECK_NOTHROW(validate(c));
    }

    SUBCASE("C-Pack compression is refused where no routine can cover the line") {
        RunConfig c;
        apply_setting(c, "line_size", "256");
        apply_setting(c, "algorithm", "cpack");
        CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("C-Pack"),
                             std::invalid_argument);
        apply_setting(c, "algorithm", "best");
        CHECK_THROWS_AS(validate(c), std::invalid_argument);
        apply_setting(c, "algorithm", "bdi");
        CHECK_NOTHROW(validate(c));
        apply_setting(c, "line_size", "128"); // all three exist here
        apply_setting(c, "algorithm", "cpack");
        CHECK_NOTHROW(validate(c));
    }
}

TEST_CASE("config: output directory honors the environment") {
    unsetenv("CABASIM_OUTPUT_DIR");
    CHECK(output_dir() == ".");
    setenv("CABASIM_OUTPUT_DIR", "/tmp/caba_out", 1);
    CHECK(output_dir() == "/tmp/caba_out");
    unsetenv("CABASIM_OUTPUT_DIR");
}
