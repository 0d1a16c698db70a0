#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "caba/bits.hpp"

// Deterministic line builders shared by the unit and acceptance suites.

namespace testutil {

inline std::vector<uint8_t> line_from_words(const std::vector<uint64_t>& words,
                                            unsigned width) {
    std::vector<uint8_t> line(words.size() * width, 0);
    for (size_t i = 0; i < words.size(); ++i)
        caba::store_le(line, i * width, width, words[i]);
    return line;
}

// The anchor vector: eight 8-byte words, each within one signed byte of
// either 0x8001D000 or zero.
inline std::vector<uint8_t> anchor_line64() {
    const uint64_t base = 0x8001D000ull;
    return line_from_words({base, base + 0x08, base + 0x10, 0x0ull, base + 0x01, 0x1ull,
                            base + 0x7F, base + 0x20},
                           8);
}

inline std::vector<uint8_t> low_dynamic_range_line(std::mt19937_64& rng, size_t line_size,
                                                   uint64_t base = 0x8001D000ull,
                                                   unsigned delta_bits = 8) {
    std::uniform_int_distribution<int64_t> d(-(1ll << (delta_bits - 1)) + 1,
                                             (1ll << (delta_bits - 1)) - 1);
    std::bernoulli_distribution narrow(0.25);
    std::vector<uint64_t> w(line_size / 8);
    w[0] = base; // the explicit base word itself
    for (size_t i = 1; i < w.size(); ++i)
        w[i] = narrow(rng) ? uint64_t(d(rng)) : base + uint64_t(d(rng));
    return line_from_words(w, 8);
}

inline std::vector<uint8_t> frequent_pattern_line(std::mt19937_64& rng, size_t line_size,
                                                  double zero_frac, double narrow_frac) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int32_t> n(-128, 127);
    std::uniform_int_distribution<uint32_t> r;
    std::vector<uint64_t> w(line_size / 4);
    for (auto& v : w) {
        const double x = u(rng);
        if (x < zero_frac)
            v = 0;
        else if (x < zero_frac + narrow_frac)
            v = uint64_t(uint32_t(n(rng)));
        else
            v = r(rng);
    }
    return line_from_words(w, 4);
}

inline std::vector<uint8_t> dictionary_line(std::mt19937_64& rng, size_t line_size,
                                            unsigned distinct) {
    std::vector<uint32_t> vocab(distinct);
    for (auto& v : vocab)
        v = uint32_t(rng() | 0x01000100u); // keep away from zero/zero-extend space
    std::uniform_int_distribution<size_t> pick(0, distinct - 1);
    std::vector<uint64_t> w(line_size / 4);
    for (auto& v : w)
        v = vocab[pick(rng)];
    return line_from_words(w, 4);
}

inline std::vector<uint8_t> random_line(std::mt19937_64& rng, size_t line_size) {
    std::vector<uint8_t> line(line_size);
    for (auto& b : line)
        b = uint8_t(rng());
    return line;
}

} // namespace testutil
