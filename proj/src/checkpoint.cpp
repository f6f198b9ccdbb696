#include "capspoe/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

namespace capspoe {

namespace {

constexpr char kMagic[4] = {'C', 'P', 'O', 'E'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t pos = 0;

    void need(std::size_t k) const {
        if (pos + k > n) throw TruncatedError("checkpoint: truncated payload");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

} // namespace

void save_checkpoint(const std::map<std::string, Tensor>& sections, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kCheckpointVersion);
    put_u32(buf, static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, tensor] : sections) {
        if (name.empty()) throw IoError("checkpoint: section name must not be empty");
        for (char ch : name) {
            if (static_cast<unsigned char>(ch) > 127)
                throw IoError("checkpoint: section names must be ASCII: " + name);
        }
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        put_u32(buf, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t a = 0; a < tensor.rank(); ++a) put_u64(buf, tensor.extent(a));
        for (std::size_t k = 0; k < tensor.size(); ++k)
            put_u64(buf, std::bit_cast<std::uint64_t>(tensor[k]));
    }
    put_u64(buf, fnv1a(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("checkpoint: write failed: " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

    if (buf.size() < 4 + 4 + 4 + 8) throw TruncatedError("checkpoint: file too short");
    if (!std::equal(kMagic, kMagic + 4, buf.begin()))
        throw BadMagicError("checkpoint: bad magic bytes");

    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
    if (fnv1a(buf.data(), buf.size() - 8) != stored)
        throw ChecksumError("checkpoint: checksum mismatch");

    Reader r{buf.data(), buf.size() - 8};
    r.pos = 4;
    std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t count = r.u32();

    std::map<std::string, Tensor> sections;
    for (std::uint32_t s = 0; s < count; ++s) {
        std::uint32_t name_len = r.u32();
        r.need(name_len);
        std::string name(reinterpret_cast<const char*>(r.p + r.pos), name_len);
        r.pos += name_len;
        std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t a = 0; a < rank; ++a) {
            std::uint64_t e = r.u64();
            if (e == 0) throw DimensionError("checkpoint: zero extent in section " + name);
            shape[a] = static_cast<std::size_t>(e);
        }
        std::size_t total = shape_product(shape);
        std::vector<double> data(total);
        for (std::size_t k = 0; k < total; ++k) data[k] = std::bit_cast<double>(r.u64());
        sections.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (r.pos != r.n) throw DimensionError("checkpoint: trailing bytes after last section");
    return sections;
}

} // namespace capspoe
