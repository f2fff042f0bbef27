#pragma once

#include "qasir/errors.hpp"

#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace qasir::detail {

// Little-endian writer/reader shared by the binary formats.
class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFFu));
        }
    }
    void f32(double v) { uint(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void str16(const std::string& s) {
        if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw InvalidInput("identifier longer than 65535 bytes: " + s.substr(0, 32) + "...");
        }
        uint(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint64_t offset() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }

    void need(std::size_t n, const char* what) const {
        if (data_.size() - pos_ < n) {
            throw FormatError(std::string("truncated record: expected ") + what, pos_);
        }
    }
    template <typename T>
    T uint(const char* what) {
        need(sizeof(T), what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>(what))); }
    double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
    std::string str16(const char* what) {
        const auto n = uint<std::uint16_t>(what);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

} // namespace qasir::detail
