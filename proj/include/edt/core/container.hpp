#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "edt/core/tensor.hpp"

// Single-file tensor container, byte layout (all integers little-endian):
//
//   offset 0   : magic "EDT1" (4 bytes)
//   offset 4   : u32 version (currently 1)
//   offset 8   : u64 entry count N
//   then N manifest entries:
//     u32 name length, name bytes (UTF-8),
//     u32 rank, u64 dims[rank],
//     u64 payload offset (absolute, bytes)
//   payloads   : raw IEEE-754 binary64 values, little-endian, row-major,
//                in manifest order.
//
// Checkpoints, optimizer moments and activation dumps all use this one
// format; they differ only in entry naming conventions.

namespace edt::io {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr char kMagic[4] = {'E', 'D', 'T', '1'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(uint_n(4)); }
    std::uint64_t u64() { return uint_n(8); }
    double f64() {
        std::uint64_t bits = uint_n(8);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void seek(std::uint64_t pos) {
        if (pos > bytes_.size()) throw IoError(path_ + ": offset past end of file");
        pos_ = static_cast<std::size_t>(pos);
    }
    std::size_t pos() const { return pos_; }

private:
    std::uint64_t uint_n(std::size_t n) {
        need(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += n;
        return v;
    }
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError(path_ + ": truncated container");
    }

    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace detail

struct Entry {
    std::string name;
    Tensor value;
};

inline void write_container(const std::string& path, const std::vector<Entry>& entries) {
    std::string header;
    header.append(kMagic, 4);
    detail::put_u32(header, kVersion);
    detail::put_u64(header, entries.size());

    std::size_t manifest_size = 0;
    for (const Entry& e : entries)
        manifest_size += 4 + e.name.size() + 4 + 8 * e.value.rank() + 8;

    std::uint64_t offset = header.size() + manifest_size;
    for (const Entry& e : entries) {
        detail::put_u32(header, static_cast<std::uint32_t>(e.name.size()));
        header += e.name;
        detail::put_u32(header, static_cast<std::uint32_t>(e.value.rank()));
        for (std::size_t d : e.value.shape()) detail::put_u64(header, d);
        detail::put_u64(header, offset);
        offset += 8 * e.value.size();
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path + ": cannot open for writing");
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::string payload;
    for (const Entry& e : entries) {
        payload.clear();
        payload.reserve(8 * e.value.size());
        for (std::size_t i = 0; i < e.value.size(); ++i) detail::put_f64(payload, e.value[i]);
        f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    if (!f) throw IoError(path + ": write failed");
}

inline std::vector<Entry> read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    detail::Reader r(bytes, path);
    if (r.str(4) != std::string(kMagic, 4)) throw IoError(path + ": bad magic (not an EDT1 file)");
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw IoError(path + ": unsupported version " + std::to_string(version));
    std::uint64_t count = r.u64();

    struct Meta {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Meta> metas;
    for (std::uint64_t i = 0; i < count; ++i) {
        Meta m;
        std::uint32_t name_len = r.u32();
        m.name = r.str(name_len);
        std::uint32_t rank = r.u32();
        if (rank > 8) throw IoError(path + ": implausible tensor rank");
        for (std::uint32_t d = 0; d < rank; ++d) m.shape.push_back(r.u64());
        m.offset = r.u64();
        metas.push_back(std::move(m));
    }

    std::vector<Entry> entries;
    for (const Meta& m : metas) {
        r.seek(m.offset);
        Tensor t(m.shape);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.f64();
        entries.push_back({m.name, std::move(t)});
    }
    return entries;
}

inline std::map<std::string, Tensor> read_container_map(const std::string& path) {
    std::map<std::string, Tensor> out;
    for (Entry& e : read_container(path)) out.emplace(std::move(e.name), std::move(e.value));
    return out;
}

}  // namespace edt::io
