#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "caba/memhier.hpp"

using namespace caba;

namespace {

// Straightforward recency-list model to check the cache against.
struct LruOracle {
    uint32_t sets, ways;
    std::map<uint32_t, std::vector<uint64_t>> order; // set -> keys, LRU first

    bool find(uint64_t key) {
        auto& v = order[uint32_t(key % sets)];
        for (size_t i = 0; i < v.size(); ++i) {
            if (v[i] == key) {
                v.erase(v.begin() + ptrdiff_t(i));
                v.push_back(key);
                return true;
            }
        }
        return false;
    }
    // returns evicted key or ~0
    uint64_t insert(uint64_t key) {
        auto& v = order[uint32_t(key % sets)];
        if (find(key))
            return ~0ull;
        uint64_t victim = ~0ull;
        if (v.size() == ways) {
            victim = v.front();
            v.erase(v.begin());
        }
        v.push_back(key);
        return victim;
    }
};

MemConfig small_mem() {
    MemConfig m;
    m.line_size = 128;
    m.burst_size = 32;
    m.memory_bytes = 1ull << 20;
    return m;
}

} // namespace

TEST_CASE("lru cache matches a recency-list model") {
    LruCache<uint64_t> cache(8, 4);
    LruOracle oracle{8, 4, {}};
    std::mt19937_64 rng(0x17u);
    std::uniform_int_distribution<uint64_t> keys(0, 127);
    for (int i = 0; i < 20000; ++i) {
        const uint64_t k = keys(rng);
        if (rng() & 1) {
            const bool hit = cache.find(k) != nullptr;
            CHECK(hit == oracle.find(k));
        } else {
            const auto v = cache.insert(k, k * 3, false);
            const uint64_t want = oracle.insert(k);
            if (want == ~0ull) {
                CHECK(!v.valid);
            } else {
                REQUIRE(v.valid);
                CHECK(v.key == want);
                CHECK(v.payload == want * 3);
            }
        }
    }
}

TEST_CASE("metadata cache: one miss then hits across a block") {
    MetadataSystem md(small_mem());
    CHECK(md.lines_per_block() == 256);
    for (uint64_t line = 0; line < 256; ++line) {
        const auto r = md.lookup(line);
        CHECK(r.code == MetadataSystem::kRaw);
        CHECK(r.hit == (line != 0));
    }
    CHECK(md.lookups() == 256);
    CHECK(md.hits() == 255);
    // the next block misses again
    CHECK(!md.lookup(256).hit);
}

TEST_CASE("metadata writes go through without allocating") {
    MetadataSystem md(small_mem());
    const uint64_t far_line = 4096;
    md.write(far_line, 2);
    CHECK(md.peek(far_line) == 2);
    const auto r = md.lookup(far_line); // the write did not populate the cache
    CHECK(!r.hit);
    CHECK(r.code == 2);
    CHECK(md.lookup(far_line).hit);
    md.write(far_line, 3); // update while cached stays coherent
    CHECK(md.lookup(far_line).code == 3);
    // neighbours in the same block share the fill
    CHECK(md.lookup(far_line + 1).hit);
    CHECK(md.lookup(far_line + 1).code == 0);
}

TEST_CASE("metadata cache evicts by set like any other cache") {
    MemConfig cfg = small_mem();
    cfg.memory_bytes = 64ull << 20;
    MetadataSystem md(cfg); // 32 sets x 4 ways of 256-line blocks
    const uint64_t stride = 256 * 32; // same set, different blocks
    for (uint64_t i = 0; i < 5; ++i)
        CHECK(!md.lookup(i * stride).hit);
    CHECK(!md.lookup(0).hit); // way 0 was the LRU victim
    CHECK(md.lookup(4 * stride).hit);
}

TEST_CASE("store buffer merges, fills, forwards and overflows") {
    StoreBuffer sb(2, 128);
    CHECK(sb.has_space());
    auto& e = sb.allocate(7);
    sb.merge(e, 0, std::vector<uint8_t>(64, 0xAA));
    CHECK(!e.full());
    CHECK(e.dirty_count() == 64);
    sb.merge(e, 64, std::vector<uint8_t>(64, 0xBB));
    CHECK(e.full());

    auto& e2 = sb.allocate(9);
    sb.merge(e2, 16, std::vector<uint8_t>{1, 2, 3, 4});
    std::vector<uint8_t> base(128, 0xFF);
    sb.forward(e2, base);
    CHECK(base[15] == 0xFF);
    CHECK(base[16] == 1);
    CHECK(base[19] == 4);
    CHECK(base[20] == 0xFF);

    CHECK(!sb.has_space());
    CHECK(sb.oldest()->line == 7);
    CHECK_THROWS(sb.allocate(11));
    sb.release(7);
    CHECK(sb.has_space());
    CHECK(sb.find(7) == nullptr);
    REQUIRE(sb.find(9) != nullptr);
    CHECK(sb.oldest()->line == 9);
}

TEST_CASE("dram bus is busy exactly bursts times cycles-per-burst") {
    MemConfig cfg = small_mem();
    DramModel dram(cfg);
    std::mt19937_64 rng(0xD7A3);
    std::uniform_int_distribution<uint64_t> lines(0, 4095);
    std::uniform_int_distribution<uint32_t> bursts(1, 4);
    uint64_t pushed = 0, finished = 0, cycle = 0;
    for (; cycle < 60000; ++cycle) {
        if (pushed < 500 && cycle % 7 == 0) {
            dram.push(lines(rng), bursts(rng), rng() & 1, (rng() & 7) == 0, cycle);
            ++pushed;
        }
        finished += dram.tick(cycle).size();
        if (pushed == 500 && dram.idle())
            break;
    }
    REQUIRE(finished == 500);
    CHECK(dram.reads + dram.writes == 500);
    CHECK(dram.row_hits + dram.row_misses == 500);
    CHECK(dram.busy_cycles == (dram.data_bursts + dram.md_bursts) * cfg.cycles_per_burst);
    CHECK(dram.idle());
    CHECK(dram.in_flight() == 0);
}

TEST_CASE("dram timing: activation off-bus, transfer on-bus") {
    MemConfig cfg = small_mem(); // penalty 20, 2 cycles per burst
    DramModel dram(cfg);
    const uint64_t id = dram.push(0, 4, false, false, 0);
    uint64_t done_at = ~0ull;
    for (uint64_t t = 0; t < 100 && done_at == ~0ull; ++t) {
        for (uint64_t c : dram.tick(t))
            if (c == id)
                done_at = t;
    }
    // 20 cycles to open the row, then 4 bursts x 2 cycles on the bus
    CHECK(done_at == 28);
    CHECK(dram.busy_cycles == 8);
    CHECK(dram.row_misses == 1);
}

TEST_CASE("dram row hits overtake within the bypass window only") {
    MemConfig cfg = small_mem();
    cfg.row_bypass_depth = 4;
    {
        DramModel dram(cfg);
        // open row 0 with a first request, then queue a row-1 request ahead
        // of a row-0 request in the same bank
        const uint64_t warm = dram.push(0, 1, false, false, 0);
        const uint64_t other = dram.push(16 * 16, 1, false, false, 0); // row 16, bank 0
        const uint64_t hitter = dram.push(1, 1, false, false, 0);      // row 0, bank 0
        std::vector<uint64_t> order;
        for (uint64_t t = 0; t < 200 && order.size() < 3; ++t)
            for (uint64_t c : dram.tick(t))
                order.push_back(c);
        REQUIRE(order.size() == 3);
        CHECK(order[0] == warm);
        CHECK(order[1] == hitter); // bypassed the row-16 request
        CHECK(order[2] == other);
        CHECK(dram.row_hits == 1);
    }
    {
        cfg.row_bypass_depth = 1; // no look-ahead: strict order
        DramModel dram(cfg);
        const uint64_t warm = dram.push(0, 1, false, false, 0);
        const uint64_t other = dram.push(16 * 16, 1, false, false, 0);
        const uint64_t hitter = dram.push(1, 1, false, false, 0);
        std::vector<uint64_t> order;
        for (uint64_t t = 0; t < 200 && order.size() < 3; ++t)
            for (uint64_t c : dram.tick(t))
                order.push_back(c);
        REQUIRE(order.size() == 3);
        CHECK(order[0] == warm);
        CHECK(order[1] == other);
        CHECK(order[2] == hitter);
        CHECK(dram.row_hits == 0);
    }
}

TEST_CASE("dram service is deterministic") {
    auto run = [] {
        DramModel dram(small_mem());
        std::mt19937_64 rng(42);
        std::vector<uint64_t> order;
        for (uint64_t t = 0; t < 5000; ++t) {
            if (t < 400 && t % 3 == 0)
                dram.push(rng() % 1024, 1 + rng() % 4, rng() & 1, false, t);
            for (uint64_t c : dram.tick(t))
                order.push_back(c);
        }
        return order;
    };
    CHECK(run() == run());
}

TEST_CASE("memory image materializes, writes back and round-trips") {
    MemConfig cfg = small_mem();
    auto init = [](uint64_t line, std::span<uint8_t> bytes) {
        for (size_t i = 0; i < bytes.size(); ++i)
            bytes[i] = uint8_t(line * 7 + i);
    };
    MemoryImage img(cfg, init);
    CHECK(img.num_lines() == cfg.memory_bytes / cfg.line_size);

    const auto raw5 = img.read_raw(5);
    CHECK(raw5[0] == uint8_t(35));
    CHECK(!img.written(5));

    const std::vector<uint8_t> zeros(cfg.line_size, 0);
    const CodecConfig ccfg{cfg.line_size, cfg.burst_size};
    img.write(9, bdi_compress(zeros, ccfg));
    CHECK(img.written(9));
    CHECK(img.read(9).algorithm == Algorithm::BDI);
    CHECK(img.read_raw(9) == zeros);

    std::vector<uint8_t> patt(cfg.line_size);
    for (size_t i = 0; i < patt.size(); ++i)
        patt[i] = uint8_t(i * 3);
    img.write(123, store_raw(patt, ccfg));

    std::ostringstream os;
    img.dump(os);
    MemoryImage img2(cfg);
    std::istringstream is(os.str());
    img2.load(is);
    CHECK(img2.read_raw(9) == zeros);
    CHECK(img2.read_raw(123) == patt);
    // untouched lines fall back to the new image's init (zero)
    CHECK(img2.read_raw(5) == zeros);

    std::istringstream bad("#wrong\n");
    MemoryImage img3(cfg);
    CHECK_THROWS(img3.load(bad));
    MemConfig other = cfg;
    other.line_size = 64;
    MemoryImage img4(other);
    std::istringstream mismatched(os.str());
    CHECK_THROWS(img4.load(mismatched));
}

TEST_CASE("out-of-range lines are rejected") {
    MemConfig cfg = small_mem();
    MemoryImage img(cfg);
    CHECK_THROWS(img.read(img.num_lines()));
    CHECK_THROWS(img.write(img.num_lines(), CompressedLine{}));
}
