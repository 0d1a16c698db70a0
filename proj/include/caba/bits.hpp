#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace caba {

// Little-endian field accessors used by the compression formats and the
// micro-op engine. Widths are in bytes (1..8) unless a function says bits.

inline uint64_t load_le(std::span<const uint8_t> buf, size_t offset, unsigned width) {
    uint64_t v = 0;
    for (unsigned i = 0; i < width; ++i)
        v |= uint64_t(buf[offset + i]) << (8 * i);
    return v;
}

inline void store_le(std::span<uint8_t> buf, size_t offset, unsigned width, uint64_t v) {
    for (unsigned i = 0; i < width; ++i)
        buf[offset + i] = uint8_t(v >> (8 * i));
}

inline int64_t sign_extend(uint64_t v, unsigned width) {
    if (width >= 8)
        return int64_t(v);
    const uint64_t sign = uint64_t(1) << (8 * width - 1);
    const uint64_t mask = (uint64_t(1) << (8 * width)) - 1;
    v &= mask;
    return int64_t((v ^ sign) - sign);
}

// True when the two's-complement value survives truncation to `width` bytes.
inline bool fits_signed(uint64_t v, unsigned width) {
    return uint64_t(sign_extend(v, width)) == v;
}

inline bool fits_unsigned(uint64_t v, unsigned width) {
    if (width >= 8)
        return true;
    return v < (uint64_t(1) << (8 * width));
}

// Bit-granular accessors, LSB-first within each byte (bit j lives in
// buf[j/8] at position j%8). Used for packed 2-bit pattern codes, 4-bit
// word codes and base-select masks.

inline uint64_t load_bits(std::span<const uint8_t> buf, size_t bit_offset, unsigned bit_width) {
    uint64_t v = 0;
    for (unsigned i = 0; i < bit_width; ++i) {
        const size_t j = bit_offset + i;
        v |= uint64_t((buf[j >> 3] >> (j & 7)) & 1u) << i;
    }
    return v;
}

inline void store_bits(std::span<uint8_t> buf, size_t bit_offset, unsigned bit_width, uint64_t v) {
    for (unsigned i = 0; i < bit_width; ++i) {
        const size_t j = bit_offset + i;
        const uint8_t bit = uint8_t(1u << (j & 7));
        if ((v >> i) & 1)
            buf[j >> 3] |= bit;
        else
            buf[j >> 3] &= uint8_t(~bit);
    }
}

} // namespace caba
