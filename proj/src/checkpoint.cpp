#include "roiattn/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace roiattn {

namespace {

constexpr char kMagic[] = {'R', 'A', 'T', 'N', '1', '\n'};

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CheckpointError(std::string("truncated checkpoint reading ") + what);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
}

void write_f32(std::ostream& os, const float* v, size_t n) {
    // Little-endian target assumed; byte layout is pinned by the format.
    static_assert(sizeof(float) == 4);
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits;
        std::memcpy(&bits, &v[i], 4);
        write_u32(os, bits);
    }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedParam>& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
    os.write(kMagic, sizeof(kMagic));
    for (const NamedParam& p : params) {
        write_u32(os, uint32_t(p.name.size()));
        os.write(p.name.data(), std::streamsize(p.name.size()));
        write_u32(os, uint32_t(p.tensor.rank()));
        for (int i = 0; i < p.tensor.rank(); ++i) {
            write_u32(os, uint32_t(p.tensor.dim(i)));
        }
        write_f32(os, p.tensor.data(), size_t(p.tensor.numel()));
    }
    if (!os) throw CheckpointError("write failed for " + path.string());
}

std::vector<NamedParam> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("unknown checkpoint magic in " + path.string());
    }
    std::vector<NamedParam> out;
    for (;;) {
        is.peek();
        if (is.eof()) break;
        const uint32_t name_len = read_u32(is, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw CheckpointError("truncated checkpoint reading name");
        const uint32_t rank = read_u32(is, "rank");
        Shape shape(rank);
        for (uint32_t i = 0; i < rank; ++i) {
            shape[i] = int(read_u32(is, "extent"));
        }
        const int64_t n = shape_numel(shape);
        std::vector<float> values(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) {
            const uint32_t bits = read_u32(is, "payload");
            float f;
            std::memcpy(&f, &bits, 4);
            values[size_t(i)] = f;
        }
        out.push_back(NamedParam{std::move(name),
                                 Tensor::from_values(std::move(shape), std::move(values))});
    }
    return out;
}

void apply_checkpoint(std::vector<NamedParam>& dest, const std::vector<NamedParam>& loaded) {
    std::map<std::string, const NamedParam*> by_name;
    for (const NamedParam& p : loaded) by_name[p.name] = &p;
    for (NamedParam& d : dest) {
        auto it = by_name.find(d.name);
        if (it == by_name.end()) {
            throw CheckpointError("checkpoint is missing parameter " + d.name);
        }
        const Tensor& src = it->second->tensor;
        if (src.shape() != d.tensor.shape()) {
            throw CheckpointError("checkpoint shape mismatch for " + d.name + ": " +
                                  shape_str(src.shape()) + " vs " + shape_str(d.tensor.shape()));
        }
        std::memcpy(d.tensor.data(), src.data(), size_t(src.numel()) * sizeof(float));
    }
}

}  // namespace roiattn
