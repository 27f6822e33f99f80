#include "plae/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace plae {
namespace {

constexpr char kMagic[5] = {'P', 'L', 'A', 'E', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

bool get_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return true;
}

void put_f32(std::ostream& os, const float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        unsigned char b[4];
        for (int k = 0; k < 4; ++k) b[k] = (unsigned char)((bits >> (8 * k)) & 0xff);
        os.write(reinterpret_cast<const char*>(b), 4);
    }
}

bool get_f32(std::istream& is, float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[4];
        if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= std::uint32_t(b[k]) << (8 * k);
        std::memcpy(&data[i], &bits, 4);
    }
    return true;
}

} // namespace

void save_records(const std::string& path, const std::vector<NamedParam>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    for (const auto& rec : records) {
        put_u64(os, rec.name.size());
        os.write(rec.name.data(), std::streamsize(rec.name.size()));
        const auto& shape = rec.tensor.shape();
        put_u64(os, shape.size());
        for (int d : shape) put_u64(os, std::uint64_t(d));
        put_f32(os, rec.tensor.data().data(), size_t(rec.tensor.numel()));
    }
    if (!os) throw ParseError("write failure on " + path);
}

std::vector<NamedParam> load_records(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path);
    char magic[5];
    if (!is.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0) {
        throw ParseError("bad checkpoint magic in " + path);
    }
    std::vector<NamedParam> out;
    for (;;) {
        std::uint64_t name_len;
        if (!get_u64(is, name_len)) {
            if (is.eof() && is.gcount() == 0) break; // clean end of file
            throw ParseError("truncated checkpoint record in " + path);
        }
        if (name_len > (1u << 16)) throw ParseError("implausible name length in " + path);
        std::string name(size_t(name_len), '\0');
        if (!is.read(name.data(), std::streamsize(name_len))) {
            throw ParseError("truncated checkpoint record in " + path);
        }
        std::uint64_t rank;
        if (!get_u64(is, rank) || rank > 8) {
            throw ParseError("truncated or malformed checkpoint record in " + path);
        }
        Shape shape;
        std::int64_t numel = 1;
        for (std::uint64_t i = 0; i < rank; ++i) {
            std::uint64_t d;
            if (!get_u64(is, d) || d == 0 || d > (1u << 30)) {
                throw ParseError("truncated or malformed checkpoint record in " + path);
            }
            shape.push_back(int(d));
            numel *= std::int64_t(d);
        }
        std::vector<float> data(static_cast<std::size_t>(numel));
        if (!get_f32(is, data.data(), data.size())) {
            throw ParseError("truncated checkpoint data in " + path);
        }
        out.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
    }
    return out;
}

void save_checkpoint(const std::string& path, const std::vector<NamedParam>& params,
                     const Adam* optimizer) {
    std::vector<NamedParam> records = params;
    if (optimizer) {
        if (optimizer->param_count() != params.size()) {
            throw ShapeError("optimizer state does not match parameter list");
        }
        records.push_back({"adam.step", Tensor::scalar(float(optimizer->step_count()))});
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& m = optimizer->first_moment(i);
            const auto& v = optimizer->second_moment(i);
            records.push_back({"adam.m." + params[i].name,
                               Tensor::from_data(params[i].tensor.shape(), {m.begin(), m.end()})});
            records.push_back({"adam.v." + params[i].name,
                               Tensor::from_data(params[i].tensor.shape(), {v.begin(), v.end()})});
        }
    }
    save_records(path, records);
}

std::vector<NamedParam> load_checkpoint(const std::string& path,
                                        const std::vector<NamedParam>& params) {
    auto records = load_records(path);
    std::vector<NamedParam> leftover;
    std::vector<bool> used(records.size(), false);
    for (const auto& p : params) {
        bool found = false;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].name != p.name) continue;
            if (records[i].tensor.shape() != p.tensor.shape()) {
                throw ParseError("checkpoint record " + p.name + " has shape " +
                                 shape_str(records[i].tensor.shape()) + ", model expects " +
                                 shape_str(p.tensor.shape()));
            }
            Tensor dst = p.tensor;
            auto src = records[i].tensor.data();
            std::copy(src.begin(), src.end(), dst.data().begin());
            used[i] = true;
            found = true;
            break;
        }
        if (!found) throw ParseError("checkpoint is missing record " + p.name);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!used[i]) leftover.push_back(std::move(records[i]));
    }
    return leftover;
}

} // namespace plae
