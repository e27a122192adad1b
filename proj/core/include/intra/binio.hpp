#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "intra/error.hpp"

namespace intra {

// Append-only little-endian byte buffer.
class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* p, size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void put_str(std::string_view s) {
        put<uint32_t>(static_cast<uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    size_t size() const { return buf_.size(); }
    const std::vector<unsigned char>& bytes() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

// Bounds-checked cursor; running past the end raises Errc::truncated.
class ByteReader {
public:
    explicit ByteReader(std::vector<unsigned char> bytes) : buf_(std::move(bytes)) {}

    template <typename T>
    T get() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void get_bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::string get_str() {
        auto n = get<uint32_t>();
        std::string s(n, '\0');
        get_bytes(s.data(), n);
        return s;
    }
    void seek(size_t p) {
        if (p > buf_.size()) fail(Errc::truncated, "offset past end of file");
        pos_ = p;
    }
    size_t pos() const { return pos_; }
    size_t size() const { return buf_.size(); }

private:
    void need(size_t n) const {
        if (pos_ + n > buf_.size()) fail(Errc::truncated, "unexpected end of file");
    }
    std::vector<unsigned char> buf_;
    size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);

// Writes to path.tmp then renames over path.
void write_file_atomic(const std::string& path, const void* data, size_t n);
inline void write_file_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

// 64-bit FNV-1a, used for weight checksums and params hashes.
uint64_t fnv1a(const void* data, size_t n, uint64_t seed = 1469598103934665603ULL);
std::string hex64(uint64_t v);

}  // namespace intra
