#pragma once

// Little-endian binary record writer/reader with a trailing CRC-32, shared by
// the discretizer (CDSC) and checkpoint (CUNW) formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "colorunet/error.hpp"

namespace colorunet::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class BinaryWriter {
public:
    void magic(std::string_view m) { bytes(m.data(), m.size()); }

    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }

    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void f32_array(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }

    const std::vector<std::uint8_t>& buffer() const { return buf_; }

    /// Appends the CRC-32 of everything written so far and writes the file.
    void finish(const std::string& path) {
        const std::uint32_t crc = checksum(buf_);
        u32(crc);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + path + "' for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()),
                  static_cast<std::streamsize>(buf_.size()));
        if (!out) throw DataError("failed writing '" + path + "'");
    }

    static std::uint32_t checksum(std::span<const std::uint8_t> data) {
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
        return static_cast<std::uint32_t>(crc);
    }

private:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }

    std::vector<std::uint8_t> buf_;
};

class BinaryReader {
public:
    /// Reads the whole file and verifies the trailing checksum.
    static BinaryReader open(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open '" + path + "'");
        std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
        return BinaryReader(std::move(data), path);
    }

    BinaryReader(std::vector<std::uint8_t> data, std::string origin)
        : data_(std::move(data)), origin_(std::move(origin)) {}

    void expect_magic(std::string_view m) {
        if (data_.size() < m.size() ||
            std::memcmp(data_.data(), m.data(), m.size()) != 0)
            throw FormatError("'" + origin_ + "': bad magic, expected '" +
                              std::string(m) + "'");
        pos_ = m.size();
        if (data_.size() < m.size() + sizeof(std::uint32_t))
            throw FormatError("'" + origin_ + "': truncated file");
        end_ = data_.size() - sizeof(std::uint32_t);
        std::uint32_t stored;
        std::memcpy(&stored, data_.data() + end_, sizeof stored);
        const auto body = std::span<const std::uint8_t>(data_.data(), end_);
        if (BinaryWriter::checksum(body) != stored)
            throw FormatError("'" + origin_ + "': checksum mismatch (truncated or corrupt)");
    }

    std::uint8_t u8() { return pod<std::uint8_t>(); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    float f32() { return pod<float>(); }
    double f64() { return pod<double>(); }

    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void f32_array(std::span<float> out) {
        need(out.size_bytes());
        std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    bool at_end() const { return pos_ == end_; }
    const std::string& origin() const { return origin_; }

private:
    template <class T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }

    void need(std::size_t n) const {
        if (pos_ + n > end_) throw FormatError("'" + origin_ + "': truncated file");
    }

    std::vector<std::uint8_t> data_;
    std::string origin_;
    std::size_t pos_ = 0;
    std::size_t end_ = 0;
};

}  // namespace colorunet::io
