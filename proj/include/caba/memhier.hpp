#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "caba/codec.hpp"

namespace caba {

struct MemConfig {
    uint32_t line_size = 128;
    uint32_t burst_size = 32;
    uint32_t l1_bytes = 16384;
    uint32_t l1_ways = 4;
    uint32_t l1_hit_latency = 4;
    uint32_t l2_bytes = 786432;
    uint32_t l2_ways = 16;
    uint32_t l2_hit_latency = 20;
    uint32_t store_buffer_lines = 8;
    uint32_t mem_queue_depth = 16;
    uint32_t banks = 16;
    uint32_t cycles_per_burst = 2;
    uint32_t row_miss_penalty = 20;
    uint32_t row_bypass_depth = 4;
    uint32_t row_lines = 16; // lines per open row
    uint32_t md_cache_bytes = 8192;
    uint32_t md_cache_ways = 4;
    uint32_t md_block_bytes = 64;
    uint64_t memory_bytes = 64ull << 20;
};

// Set-associative LRU cache keyed by line index. Payload is raw bytes for
// the L1 and a stored form for the L2; recency is a global stamp.
template <typename Payload>
class LruCache {
public:
    LruCache(uint32_t sets, uint32_t ways) : sets_(sets), ways_(ways), table_(sets) {}

    Payload* find(uint64_t key) {
        auto* e = slot(key);
        if (!e)
            return nullptr;
        e->stamp = ++clock_;
        return &e->payload;
    }
    const Payload* peek(uint64_t key) const {
        const auto* e = slot(key);
        return e ? &e->payload : nullptr;
    }
    bool dirty(uint64_t key) const {
        const auto* e = slot(key);
        return e && e->dirty;
    }
    void set_dirty(uint64_t key, bool d) {
        if (auto* e = slot(key))
            e->dirty = d;
    }

    struct Victim {
        bool valid = false;
        uint64_t key = 0;
        Payload payload{};
        bool dirty = false;
    };
    // Inserts (replacing any same-key entry) and returns the evicted victim.
    Victim insert(uint64_t key, Payload payload, bool dirty) {
        auto& set = table_[key % sets_];
        for (auto& e : set) {
            if (e.key == key) {
                e.payload = std::move(payload);
                e.dirty = dirty;
                e.stamp = ++clock_;
                return {};
            }
        }
        if (set.size() < ways_) {
            set.push_back(Entry{key, std::move(payload), dirty, ++clock_});
            return {};
        }
        size_t lru = 0;
        for (size_t i = 1; i < set.size(); ++i)
            if (set[i].stamp < set[lru].stamp)
                lru = i;
        Victim v{true, set[lru].key, std::move(set[lru].payload), set[lru].dirty};
        set[lru] = Entry{key, std::move(payload), dirty, ++clock_};
        return v;
    }
    bool erase(uint64_t key) {
        auto& set = table_[key % sets_];
        for (size_t i = 0; i < set.size(); ++i) {
            if (set[i].key == key) {
                set.erase(set.begin() + ptrdiff_t(i));
                return true;
            }
        }
        return false;
    }
    size_t size() const {
        size_t n = 0;
        for (const auto& s : table_)
            n += s.size();
        return n;
    }
    uint32_t sets() const { return sets_; }
    uint32_t ways() const { return ways_; }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& s : table_)
            for (const auto& e : s)
                fn(e.key, e.payload, e.dirty);
    }

private:
    struct Entry {
        uint64_t key;
        Payload payload;
        bool dirty;
        uint64_t stamp;
    };
    Entry* slot(uint64_t key) {
        for (auto& e : table_[key % sets_])
            if (e.key == key)
                return &e;
        return nullptr;
    }
    const Entry* slot(uint64_t key) const {
        for (const auto& e : table_[key % sets_])
            if (e.key == key)
                return &e;
        return nullptr;
    }
    uint32_t sets_;
    uint32_t ways_;
    std::vector<std::vector<Entry>> table_;
    uint64_t clock_ = 0;
};

// Two bits of stored-form metadata per line, backed in memory, with a small
// read-allocate cache. The code value is always served from the backing
// array (it is never stale); the cache models lookup timing only. Writes go
// straight through without allocating; their bus cost is absorbed by the
// line writeback they accompany.
class MetadataSystem {
public:
    // Codes 1..3 match Algorithm values; 0 means stored raw.
    static constexpr uint8_t kRaw = 0;

    explicit MetadataSystem(const MemConfig& cfg);

    struct Result {
        uint8_t code;
        bool hit; // miss costs one metadata burst at the DRAM
    };
    Result lookup(uint64_t line);
    void write(uint64_t line, uint8_t code);
    uint8_t peek(uint64_t line) const;

    uint64_t lookups() const { return lookups_; }
    uint64_t hits() const { return hits_; }
    uint32_t lines_per_block() const { return lines_per_block_; }

private:
    std::vector<uint8_t> codes_; // packed, 2 bits per line
    LruCache<char> cache_;
    uint32_t lines_per_block_;
    uint64_t lookups_ = 0;
    uint64_t hits_ = 0;
};

// Dedicated write-combining entries between the lanes and the L1. A full
// dirty mask makes the line eligible for compressed writeback.
class StoreBuffer {
public:
    StoreBuffer(uint32_t entries, uint32_t line_size);

    struct Entry {
        uint64_t line = 0;
        std::vector<uint8_t> bytes;
        std::vector<bool> dirty;
        uint64_t age = 0; // allocation order
        bool full() const {
            for (bool b : dirty)
                if (!b)
                    return false;
            return true;
        }
        uint32_t dirty_count() const {
            uint32_t n = 0;
            for (bool b : dirty)
                n += b;
            return n;
        }
    };

    Entry* find(uint64_t line);
    bool has_space() const { return entries_.size() < capacity_; }
    Entry& allocate(uint64_t line); // requires has_space()
    void merge(Entry& e, uint32_t offset, std::span<const uint8_t> data);
    // Copies the entry's dirty bytes over `out` (load forwarding).
    void forward(const Entry& e, std::span<uint8_t> out) const;
    Entry* oldest();
    void release(uint64_t line);
    size_t size() const { return entries_.size(); }
    uint32_t capacity() const { return capacity_; }
    std::vector<Entry*> all();

private:
    uint32_t capacity_;
    uint32_t line_size_;
    uint64_t next_age_ = 0;
    std::deque<Entry> entries_;
};

// Banked DRAM with a shared bus. The bus is busy only while bursts move, so
// busy_cycles == (data_bursts + md_bursts) * cycles_per_burst always holds.
// Row activation is charged off-bus per bank; a short FCFS bypass window
// lets row hits overtake.
class DramModel {
public:
    explicit DramModel(const MemConfig& cfg);

    uint64_t push(uint64_t line, uint32_t bursts, bool write, bool metadata, uint64_t now);
    // Advances one cycle; returns request ids that completed this cycle.
    std::vector<uint64_t> tick(uint64_t now);
    bool idle() const;
    size_t in_flight() const;

    uint64_t busy_cycles = 0;
    uint64_t data_bursts = 0;
    uint64_t md_bursts = 0;
    uint64_t reads = 0;
    uint64_t writes = 0;
    uint64_t row_hits = 0;
    uint64_t row_misses = 0;

private:
    struct Req {
        uint64_t id;
        uint64_t row;
        uint32_t bursts;
        bool write;
        bool metadata;
    };
    struct Bank {
        std::deque<Req> queue;
        std::optional<Req> prepared;
        uint64_t ready_at = 0;
        uint64_t open_row = 0;
        bool row_open = false;
    };

    MemConfig cfg_;
    std::vector<Bank> banks_;
    std::vector<std::pair<uint64_t, uint64_t>> completions_; // (cycle, id)
    uint64_t bus_free_at_ = 0;
    uint64_t next_id_ = 1;
    uint32_t rr_ = 0;
};

// Functional per-line backing store. Untouched lines materialize on demand
// from the init generator (default all-zero) and are stored raw; writebacks
// may install compressed forms.
class MemoryImage {
public:
    using InitFn = std::function<void(uint64_t line, std::span<uint8_t> bytes)>;

    MemoryImage(const MemConfig& cfg, InitFn init = {});

    uint64_t num_lines() const { return num_lines_; }
    const CompressedLine& read(uint64_t line);
    void write(uint64_t line, CompressedLine stored);
    std::vector<uint8_t> read_raw(uint64_t line);
    bool written(uint64_t line) const;

    // "#cabamem v1" text: one `<line-index-hex> <raw-bytes-hex>` row per
    // written line.
    void dump(std::ostream& os);
    void load(std::istream& is);

private:
    struct Slot {
        CompressedLine stored;
        bool written = false;
    };
    Slot& materialize(uint64_t line);

    CodecConfig codec_;
    uint64_t num_lines_;
    InitFn init_;
    std::unordered_map<uint64_t, Slot> slots_;
};

} // namespace caba
