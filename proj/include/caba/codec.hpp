#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace caba {

// Scalar cache-line compression codecs. These are the ground-truth
// implementations; the assist-warp subroutines must match them bit for bit.

enum class Algorithm : uint8_t { BDI = 1, FPC = 2, CPACK = 3, NONE = 0 };

enum class BdiKind : uint8_t {
    Zeros = 0,
    Repeated = 1,
    B8D1 = 2, // 8-byte base, 1-byte deltas
    B8D2 = 3,
    B8D4 = 4,
    B4D1 = 5,
    B4D2 = 6,
    B2D1 = 7,
    Uncompressed = 8,
};

enum class FpcPattern : uint8_t {
    ZeroWords = 0,
    SignExtByte = 1,
    SignExtHalf = 2,
    Uncompressed = 3,
};

enum class CpackCode : uint8_t {
    Zero = 0,
    FullMatch = 1,
    PartialMatch = 2, // dictionary hit except the low byte
    ZeroExtend = 3,   // value fits in one unsigned byte
};

struct CodecConfig {
    uint32_t line_size = 128;
    uint32_t burst_size = 32;
};

// Fixed format parameters shared with the subroutine builder.
inline constexpr uint32_t kFpcSegmentBytes = 16;
inline constexpr uint32_t kFpcWordBytes = 4;
inline constexpr uint32_t kCpackWordBytes = 4;
inline constexpr uint32_t kCpackMaxDict = 4;

struct MalformedHeader : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DictIndexOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SizeOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Stored form of one line: metadata bytes at offset 0, then the payload.
// The algorithm/encoding pair travels out-of-band with the line (the fill
// metadata channel), mirroring tag-resident encoding bits.
struct CompressedLine {
    Algorithm algorithm = Algorithm::NONE;
    uint8_t encoding = 0; // BdiKind for BDI, 0 otherwise
    uint32_t line_size = 0;
    uint32_t header_len = 0;
    std::vector<uint8_t> data; // header followed by payload

    size_t total_size() const { return data.size(); }
    std::span<const uint8_t> header() const {
        return std::span<const uint8_t>(data).first(header_len);
    }
    std::span<const uint8_t> payload() const {
        return std::span<const uint8_t>(data).subspan(header_len);
    }
    bool compressed() const { return algorithm != Algorithm::NONE; }
};

// One byte identifying (algorithm, encoding) on the fill/trigger path.
uint8_t encoding_id(Algorithm alg, uint8_t encoding);
Algorithm encoding_id_algorithm(uint8_t id);
uint8_t encoding_id_detail(uint8_t id);

struct BdiView {
    uint32_t base_size;
    uint32_t delta_size;
};
// Base/delta geometry for a BxDy kind; throws MalformedHeader for
// Zeros/Repeated/Uncompressed which have no word view.
BdiView bdi_view(BdiKind kind);

// Fixed first-fit probe order for BDI compression.
inline constexpr BdiKind kBdiProbeOrder[] = {
    BdiKind::Zeros, BdiKind::Repeated, BdiKind::B8D1, BdiKind::B8D2,
    BdiKind::B4D1,  BdiKind::B8D4,     BdiKind::B4D2, BdiKind::B2D1,
};

CompressedLine bdi_compress(std::span<const uint8_t> line, const CodecConfig& cfg);
CompressedLine fpc_compress(std::span<const uint8_t> line, const CodecConfig& cfg);
CompressedLine cpack_compress(std::span<const uint8_t> line, const CodecConfig& cfg);

std::vector<uint8_t> bdi_decompress(const CompressedLine& c, const CodecConfig& cfg);
std::vector<uint8_t> fpc_decompress(const CompressedLine& c, const CodecConfig& cfg);
std::vector<uint8_t> cpack_decompress(const CompressedLine& c, const CodecConfig& cfg);

// Dispatch on c.algorithm (NONE returns the raw bytes unchanged).
std::vector<uint8_t> decompress(const CompressedLine& c, const CodecConfig& cfg);

// Store the raw line with no header.
CompressedLine store_raw(std::span<const uint8_t> line, const CodecConfig& cfg);

// algorithm==NONE means "store raw".
CompressedLine compress_with(Algorithm alg, std::span<const uint8_t> line,
                             const CodecConfig& cfg);

// Runs all three and keeps the minimal burst count; ties break BDI, then
// CPACK, then FPC. Returns a raw line when nobody wins a burst.
CompressedLine best_of_all(std::span<const uint8_t> line, const CodecConfig& cfg);

// Bursts needed to move total_size bytes; throws SizeOutOfRange unless
// 0 < total_size <= line_size.
uint32_t burst_count(size_t total_size, const CodecConfig& cfg);

// Header length of a stored line for (algorithm, encoding detail); used to
// rebuild a CompressedLine from assist-warp output. encoding is the BdiKind
// for BDI and ignored otherwise.
uint32_t stored_header_len(Algorithm alg, uint8_t encoding, const CodecConfig& cfg);

// Rebuilds the stored form from compression-routine output: the encoding id
// live-out, the output buffer, and the declared size. id 0 stores the raw
// line unchanged.
CompressedLine assemble_stored(uint8_t id, std::span<const uint8_t> out,
                               size_t total_size, std::span<const uint8_t> raw_line,
                               const CodecConfig& cfg);

const char* to_string(Algorithm a);
const char* to_string(BdiKind k);

} // namespace caba
