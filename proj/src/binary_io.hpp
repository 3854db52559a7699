#pragma once

// Little-endian framing shared by the model files:
//   8-byte magic | payload | u64 FNV-1a checksum of the payload

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "icf/errors.hpp"

namespace icf::detail {

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

class ByteWriter {
public:
    void put_u32(std::uint32_t v) { put_le(v, 4); }
    void put_u64(std::uint64_t v) { put_le(v, 8); }
    void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }

    std::string& bytes() { return bytes_; }

private:
    void put_le(std::uint64_t v, int width) {
        for (int k = 0; k < width; ++k) bytes_.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
    }

    std::string bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::uint32_t get_u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::uint64_t get_u64() { return get_le(8); }
    double get_f64() { return std::bit_cast<double>(get_le(8)); }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::uint64_t get_le(std::size_t width) {
        if (remaining() < width) throw FormatError("model file is truncated");
        std::uint64_t v = 0;
        for (std::size_t k = 0; k < width; ++k) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
        }
        pos_ += width;
        return v;
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline std::string frame(std::string_view magic, std::string_view payload) {
    ByteWriter tail;
    tail.put_u64(fnv1a64(payload));
    std::string out;
    out.reserve(magic.size() + payload.size() + 8);
    out.append(magic);
    out.append(payload);
    out.append(tail.bytes());
    return out;
}

/// Checks magic and checksum, returning the payload view.
inline std::string_view unframe(std::string_view magic, std::string_view bytes) {
    if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
        throw FormatError("bad magic: expected " + std::string(magic));
    }
    if (bytes.size() < magic.size() + 8) throw FormatError("model file is truncated");
    const std::string_view payload = bytes.substr(magic.size(), bytes.size() - magic.size() - 8);
    ByteReader tail(bytes.substr(bytes.size() - 8));
    if (tail.get_u64() != fnv1a64(payload)) throw FormatError("checksum mismatch");
    return payload;
}

}  // namespace icf::detail
