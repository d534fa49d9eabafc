#include "ditto/nn/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ditto/io.hpp"

namespace ditto::nn {

using json = nlohmann::json;

namespace {
constexpr char kMagic[8] = {'D', 'I', 'T', 'T', 'O', 'C', 'K', 'P'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["config"] = model.config().to_json();

    std::vector<std::byte> payload;
    json table = json::array();
    for (const auto* p : model.params()) {
        json entry;
        entry["name"] = p->name;
        entry["shape"] = p->value.shape();
        entry["offset"] = payload.size() / 4;
        table.push_back(std::move(entry));
        const auto bytes = tensor_to_f32(p->value);
        payload.insert(payload.end(), bytes.begin(), bytes.end());
    }
    manifest["params"] = std::move(table);
    manifest["checksum"] = fnv1a(payload.data(), payload.size());

    const std::string header = manifest.dump();
    std::vector<std::byte> blob;
    blob.reserve(sizeof(kMagic) + 8 + header.size() + payload.size());
    const auto push_raw = [&blob](const void* src, std::size_t n) {
        const auto* b = static_cast<const std::byte*>(src);
        blob.insert(blob.end(), b, b + n);
    };
    push_raw(kMagic, sizeof(kMagic));
    const auto ver = kFormatVersion;
    push_raw(&ver, 4);
    const auto hsize = static_cast<std::uint32_t>(header.size());
    push_raw(&hsize, 4);
    push_raw(header.data(), header.size());
    blob.insert(blob.end(), payload.begin(), payload.end());
    atomic_write(path, blob);
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
    const auto blob = read_bytes(path);
    if (blob.size() < sizeof(kMagic) + 8 ||
        std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_model: not a checkpoint file: " + path.string());

    std::uint32_t version = 0, hsize = 0;
    std::memcpy(&version, blob.data() + 8, 4);
    std::memcpy(&hsize, blob.data() + 12, 4);
    if (version != kFormatVersion)
        throw std::runtime_error("load_model: unsupported checkpoint format version " +
                                 std::to_string(version));
    if (blob.size() < 16 + hsize)
        throw std::runtime_error("load_model: truncated checkpoint header");

    const json manifest =
        json::parse(std::string(reinterpret_cast<const char*>(blob.data()) + 16, hsize));
    const std::vector<std::byte> payload(blob.begin() + 16 + hsize, blob.end());
    if (manifest.at("checksum").get<std::uint64_t>() != fnv1a(payload.data(), payload.size()))
        throw std::runtime_error("load_model: checksum failure (corrupt checkpoint): " +
                                 path.string());

    auto model = build_model(ModelConfig::from_json(manifest.at("config")), /*seed=*/0);
    auto& params = model->params();
    const auto& table = manifest.at("params");
    if (table.size() != params.size())
        throw std::runtime_error("load_model: parameter table does not match architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& entry = table[i];
        if (entry.at("name").get<std::string>() != params[i]->name)
            throw std::runtime_error("load_model: parameter name mismatch at index " +
                                     std::to_string(i) + " (" +
                                     entry.at("name").get<std::string>() + " vs " +
                                     params[i]->name + ")");
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        if (shape != params[i]->value.shape())
            throw std::runtime_error("load_model: parameter shape mismatch for " +
                                     params[i]->name);
        const std::size_t off = entry.at("offset").get<std::size_t>() * 4;
        const std::size_t nbytes = params[i]->value.size() * 4;
        if (off + nbytes > payload.size())
            throw std::runtime_error("load_model: payload out of range for " +
                                     params[i]->name);
        const std::vector<std::byte> piece(payload.begin() + static_cast<std::ptrdiff_t>(off),
                                           payload.begin() +
                                               static_cast<std::ptrdiff_t>(off + nbytes));
        params[i]->value = tensor_from_f32(piece, shape);
    }
    return model;
}

}  // namespace ditto::nn
