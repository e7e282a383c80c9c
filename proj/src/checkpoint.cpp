#include "elbnn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace elbnn {

namespace {

constexpr char kMagic[4] = {'E', 'L', 'B', 'N'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                          (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_f32(std::ostream& os, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
}

}  // namespace

void save_checkpoint(LayerGraph& graph, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    const auto params = graph.params();
    write_u32(os, uint32_t(params.size()));
    for (const Param* p : params) {
        write_u32(os, uint32_t(p->name.size()));
        os.write(p->name.data(), std::streamsize(p->name.size()));
        write_u32(os, 4);  // rank
        write_u32(os, uint32_t(p->shape.n));
        write_u32(os, uint32_t(p->shape.c));
        write_u32(os, uint32_t(p->shape.h));
        write_u32(os, uint32_t(p->shape.w));
        write_f32(os, p->value);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(LayerGraph& graph, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    const uint32_t count = read_u32(is);
    std::map<std::string, std::pair<Shape4, std::vector<float>>> table;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint32_t rank = read_u32(is);
        if (rank != 4) throw std::runtime_error("checkpoint: unexpected rank in " + name);
        Shape4 shape;
        shape.n = int(read_u32(is));
        shape.c = int(read_u32(is));
        shape.h = int(read_u32(is));
        shape.w = int(read_u32(is));
        std::vector<float> data(size_t(shape.numel()));
        is.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * 4));
        if (!is) throw std::runtime_error("checkpoint: truncated payload in " + name);
        if (!table.emplace(name, std::make_pair(shape, std::move(data))).second)
            throw std::runtime_error("checkpoint: duplicate entry " + name);
    }

    auto params = graph.params();
    if (params.size() != table.size())
        throw std::runtime_error("checkpoint: parameter count mismatch (file " +
                                 std::to_string(table.size()) + ", graph " +
                                 std::to_string(params.size()) + ")");
    for (Param* p : params) {
        auto it = table.find(p->name);
        if (it == table.end())
            throw std::runtime_error("checkpoint: missing parameter " + p->name);
        if (!(it->second.first == p->shape))
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
        p->value = it->second.second;
    }
}

}  // namespace elbnn
