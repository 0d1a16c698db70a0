#include "caba/memhier.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace caba {

// --- MetadataSystem ------------------------------------------------------

MetadataSystem::MetadataSystem(const MemConfig& cfg)
    : codes_((cfg.memory_bytes / cfg.line_size + 3) / 4, 0),
      cache_(cfg.md_cache_bytes / cfg.md_block_bytes / cfg.md_cache_ways,
             cfg.md_cache_ways),
      lines_per_block_(cfg.md_block_bytes * 4) {}

MetadataSystem::Result MetadataSystem::lookup(uint64_t line) {
    ++lookups_;
    const uint64_t block = line / lines_per_block_;
    const bool hit = cache_.find(block) != nullptr;
    if (hit)
        ++hits_;
    else
        cache_.insert(block, 0, false); // read allocate
    return {peek(line), hit};
}

void MetadataSystem::write(uint64_t line, uint8_t code) {
    const size_t byte = size_t(line / 4);
    const unsigned shift = unsigned(line % 4) * 2;
    codes_[byte] = uint8_t((codes_[byte] & ~(0x3u << shift)) | ((code & 0x3u) << shift));
}

uint8_t MetadataSystem::peek(uint64_t line) const {
    return (codes_[size_t(line / 4)] >> (unsigned(line % 4) * 2)) & 0x3;
}

// --- StoreBuffer ---------------------------------------------------------

StoreBuffer::StoreBuffer(uint32_t entries, uint32_t line_size)
    : capacity_(entries), line_size_(line_size) {}

StoreBuffer::Entry* StoreBuffer::find(uint64_t line) {
    for (auto& e : entries_)
        if (e.line == line)
            return &e;
    return nullptr;
}

StoreBuffer::Entry& StoreBuffer::allocate(uint64_t line) {
    if (!has_space())
        throw std::logic_error("store buffer overflow");
    Entry e;
    e.line = line;
    e.bytes.assign(line_size_, 0);
    e.dirty.assign(line_size_, false);
    e.age = next_age_++;
    entries_.push_back(std::move(e));
    return entries_.back();
}

void StoreBuffer::merge(Entry& e, uint32_t offset, std::span<const uint8_t> data) {
    if (offset + data.size() > e.bytes.size())
        throw std::logic_error("store past the line");
    for (size_t i = 0; i < data.size(); ++i) {
        e.bytes[offset + i] = data[i];
        e.dirty[offset + i] = true;
    }
}

void StoreBuffer::forward(const Entry& e, std::span<uint8_t> out) const {
    for (size_t i = 0; i < e.bytes.size() && i < out.size(); ++i)
        if (e.dirty[i])
            out[i] = e.bytes[i];
}

StoreBuffer::Entry* StoreBuffer::oldest() {
    Entry* best = nullptr;
    for (auto& e : entries_)
        if (!best || e.age < best->age)
            best = &e;
    return best;
}

void StoreBuffer::release(uint64_t line) {
    for (size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].line == line) {
            entries_.erase(entries_.begin() + ptrdiff_t(i));
            return;
        }
    }
}

std::vector<StoreBuffer::Entry*> StoreBuffer::all() {
    std::vector<Entry*> out;
    for (auto& e : entries_)
        out.push_back(&e);
    return out;
}

// --- DramModel -----------------------------------------------------------

DramModel::DramModel(const MemConfig& cfg) : cfg_(cfg), banks_(cfg.banks) {}

uint64_t DramModel::push(uint64_t line, uint32_t bursts, bool write, bool metadata,
                         uint64_t) {
    const uint64_t row = line / cfg_.row_lines;
    Req r{next_id_++, row, bursts, write, metadata};
    banks_[row % cfg_.banks].queue.push_back(r);
    return r.id;
}

std::vector<uint64_t> DramModel::tick(uint64_t now) {
    std::vector<uint64_t> done;
    for (size_t i = 0; i < completions_.size();) {
        if (completions_[i].first <= now) {
            done.push_back(completions_[i].second);
            completions_.erase(completions_.begin() + ptrdiff_t(i));
        } else {
            ++i;
        }
    }

    // row selection per bank: a hit within the bypass window overtakes
    for (auto& bank : banks_) {
        if (bank.prepared || bank.queue.empty())
            continue;
        size_t pick = 0;
        if (bank.row_open) {
            const size_t window = std::min<size_t>(bank.queue.size(), cfg_.row_bypass_depth);
            for (size_t i = 0; i < window; ++i) {
                if (bank.queue[i].row == bank.open_row) {
                    pick = i;
                    break;
                }
            }
        }
        Req r = bank.queue[pick];
        bank.queue.erase(bank.queue.begin() + ptrdiff_t(pick));
        if (bank.row_open && bank.open_row == r.row) {
            ++row_hits;
            bank.ready_at = now;
        } else {
            ++row_misses;
            bank.ready_at = now + cfg_.row_miss_penalty; // activation is off-bus
            bank.open_row = r.row;
            bank.row_open = true;
        }
        bank.prepared = r;
    }

    // one shared bus: start at most one transfer per cycle
    if (now >= bus_free_at_) {
        for (uint32_t i = 0; i < cfg_.banks; ++i) {
            const uint32_t b = (rr_ + i) % cfg_.banks;
            Bank& bank = banks_[b];
            if (!bank.prepared || bank.ready_at > now)
                continue;
            const Req r = *bank.prepared;
            bank.prepared.reset();
            const uint64_t dur = uint64_t(r.bursts) * cfg_.cycles_per_burst;
            busy_cycles += dur;
            bus_free_at_ = now + dur;
            completions_.emplace_back(now + dur, r.id);
            if (r.metadata)
                md_bursts += r.bursts;
            else
                data_bursts += r.bursts;
            if (r.write)
                ++writes;
            else
                ++reads;
            rr_ = b + 1;
            break;
        }
    }
    return done;
}

bool DramModel::idle() const {
    if (!completions_.empty())
        return false;
    for (const auto& b : banks_)
        if (b.prepared || !b.queue.empty())
            return false;
    return true;
}

size_t DramModel::in_flight() const {
    size_t n = completions_.size();
    for (const auto& b : banks_)
        n += b.queue.size() + (b.prepared ? 1 : 0);
    return n;
}

// --- MemoryImage ---------------------------------------------------------

MemoryImage::MemoryImage(const MemConfig& cfg, InitFn init)
    : codec_{cfg.line_size, cfg.burst_size}, num_lines_(cfg.memory_bytes / cfg.line_size),
      init_(std::move(init)) {}

MemoryImage::Slot& MemoryImage::materialize(uint64_t line) {
    if (line >= num_lines_)
        throw std::out_of_range("line index outside the memory image");
    auto it = slots_.find(line);
    if (it != slots_.end())
        return it->second;
    std::vector<uint8_t> bytes(codec_.line_size, 0);
    if (init_)
        init_(line, bytes);
    Slot s;
    s.stored = store_raw(bytes, codec_);
    return slots_.emplace(line, std::move(s)).first->second;
}

const CompressedLine& MemoryImage::read(uint64_t line) {
    return materialize(line).stored;
}

void MemoryImage::write(uint64_t line, CompressedLine stored) {
    if (line >= num_lines_)
        throw std::out_of_range("line index outside the memory image");
    Slot s;
    s.stored = std::move(stored);
    s.written = true;
    slots_[line] = std::move(s);
}

std::vector<uint8_t> MemoryImage::read_raw(uint64_t line) {
    return decompress(read(line), codec_);
}

bool MemoryImage::written(uint64_t line) const {
    auto it = slots_.find(line);
    return it != slots_.end() && it->second.written;
}

void MemoryImage::dump(std::ostream& os) {
    os << "#cabamem v1 line_size=" << codec_.line_size << "\n";
    std::vector<uint64_t> keys;
    for (const auto& [k, v] : slots_)
        if (v.written)
            keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    static const char* hex = "0123456789abcdef";
    for (uint64_t k : keys) {
        const auto raw = read_raw(k);
        std::string row;
        for (uint8_t b : raw) {
            row.push_back(hex[b >> 4]);
            row.push_back(hex[b & 0xF]);
        }
        os << std::hex << k << std::dec << " " << row << "\n";
    }
}

void MemoryImage::load(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) ||
        header.rfind("#cabamem v1", 0) != 0)
        throw std::runtime_error("not a memory image (missing #cabamem v1)");
    const std::string want = "line_size=" + std::to_string(codec_.line_size);
    if (header.find(want) == std::string::npos)
        throw std::runtime_error("memory image line size differs from the configuration");
    std::string row;
    while (std::getline(is, row)) {
        if (row.empty() || row[0] == '#')
            continue;
        std::istringstream ls(row);
        uint64_t line = 0;
        std::string bytes_hex;
        ls >> std::hex >> line >> bytes_hex;
        if (!ls || bytes_hex.size() != size_t(codec_.line_size) * 2)
            throw std::runtime_error("malformed memory image row: " + row);
        std::vector<uint8_t> bytes(codec_.line_size);
        for (size_t i = 0; i < bytes.size(); ++i) {
            auto nib = [&](char c) -> unsigned {
                if (c >= '0' && c <= '9')
                    return unsigned(c - '0');
                if (c >= 'a' && c <= 'f')
                    return unsigned(c - 'a' + 10);
                if (c >= 'A' && c <= 'F')
                    return unsigned(c - 'A' + 10);
                throw std::runtime_error("bad hex in memory image");
            };
            bytes[i] = uint8_t(nib(bytes_hex[2 * i]) << 4 | nib(bytes_hex[2 * i + 1]));
        }
        write(line, store_raw(bytes, codec_));
    }
}

} // namespace caba
