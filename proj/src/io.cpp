#include "ditto/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "raw float32 container format assumes a little-endian host");

namespace ditto {

std::uint64_t fnv1a(const void* data, std::size_t nbytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < nbytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

void atomic_write_raw(const std::filesystem::path& path, const void* data, std::size_t n) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw std::runtime_error("atomic_write: short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    atomic_write_raw(path, contents.data(), contents.size());
}

void atomic_write(const std::filesystem::path& path, const std::vector<std::byte>& contents) {
    atomic_write_raw(path, contents.data(), contents.size());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_text: cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::byte> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("read_bytes: cannot open " + path.string());
    const std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<std::byte> buf(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(buf.data()), n);
    if (!in) throw std::runtime_error("read_bytes: short read from " + path.string());
    return buf;
}

std::vector<std::byte> tensor_to_f32(const Tensor& t) {
    std::vector<std::byte> out(t.size() * 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float f = static_cast<float>(t[i]);
        std::memcpy(out.data() + 4 * i, &f, 4);
    }
    return out;
}

Tensor tensor_from_f32(const std::vector<std::byte>& bytes,
                       const std::vector<std::size_t>& shape) {
    Tensor t(shape);
    if (bytes.size() != t.size() * 4)
        throw std::runtime_error("tensor_from_f32: payload size mismatch for shape " +
                                 Tensor::shape_str(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        float f;
        std::memcpy(&f, bytes.data() + 4 * i, 4);
        t[i] = static_cast<double>(f);
    }
    return t;
}

}  // namespace ditto
