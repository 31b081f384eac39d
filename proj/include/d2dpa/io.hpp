#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace d2dpa {

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

// Little-endian binary writer that accumulates bytes so a trailing CRC over
// the whole payload can be appended on close.
class BinaryWriter {
public:
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void f64s(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
    void bytes(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void magic(const char* m, std::size_t len) { raw(m, len); }

    void write_with_crc(const std::string& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        f.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        std::uint32_t crc = crc32(buf_.data(), buf_.size());
        f.write(reinterpret_cast<const char*>(&crc), sizeof crc);
        if (!f) throw std::runtime_error("write failed: " + path);
    }

private:
    void raw(const void* p, std::size_t len) {
        const char* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + len);
    }
    std::vector<char> buf_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for reading: " + path);
        buf_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
        if (buf_.size() < 4) throw std::runtime_error("file truncated: " + path);
        std::uint32_t stored;
        std::memcpy(&stored, buf_.data() + buf_.size() - 4, 4);
        std::uint32_t actual = crc32(buf_.data(), buf_.size() - 4);
        if (stored != actual) throw std::runtime_error("checksum mismatch: " + path);
        end_ = buf_.size() - 4;
    }

    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return get<double>(); }
    void f64s(std::vector<double>& out, std::size_t count) {
        need(count * sizeof(double));
        out.resize(count);
        std::memcpy(out.data(), buf_.data() + pos_, count * sizeof(double));
        pos_ += count * sizeof(double);
    }
    std::string bytes() {
        std::uint32_t len = u32();
        need(len);
        std::string s(buf_.data() + pos_, len);
        pos_ += len;
        return s;
    }
    void expect_magic(const char* m, std::size_t len) {
        need(len);
        if (std::memcmp(buf_.data() + pos_, m, len) != 0)
            throw std::runtime_error("bad magic; not a recognized file");
        pos_ += len;
    }
    bool at_end() const { return pos_ == end_; }

private:
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    void need(std::size_t len) const {
        if (pos_ + len > end_) throw std::runtime_error("file truncated");
    }
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::size_t end_ = 0;
};

}  // namespace d2dpa
