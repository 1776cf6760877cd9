#include "vista/tensor_archive.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "vista/util.hpp"

namespace fs = std::filesystem;

namespace vista {

namespace {

std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("tensor archive: cannot open blob file '" + path + "'");
    in.seekg(0, std::ios::end);
    std::vector<char> bytes(static_cast<size_t>(in.tellg()));
    in.seekg(0, std::ios::beg);
    in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error("tensor archive: short read on '" + path + "'");
    return bytes;
}

// Tensors are stored/loaded as little-endian f32. The targets we build on are
// little-endian; bail out loudly instead of writing byte-swapped archives.
static_assert(sizeof(float) == 4);

} // namespace

void TensorArchive::add(const std::string& name, std::vector<int64_t> shape, std::vector<float> data) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw std::runtime_error("tensor archive: non-positive dim in tensor '" + name + "'");
        n *= d;
    }
    if (n != static_cast<int64_t>(data.size())) {
        throw std::runtime_error("tensor archive: data size does not match shape for tensor '" + name + "'");
    }
    tensors_[name] = Tensor{std::move(shape), std::move(data)};
}

const Tensor& TensorArchive::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
        throw std::runtime_error("tensor archive: missing tensor '" + name + "'");
    }
    return it->second;
}

void TensorArchive::save(const std::string& dir) const {
    fs::create_directories(dir);
    const std::string blob_name = "weights.bin";

    std::vector<char> blob;
    nlohmann::json tens = nlohmann::json::object();
    for (const auto& [name, t] : tensors_) {
        size_t offset = blob.size();
        size_t bytes = t.data.size() * sizeof(float);
        blob.resize(offset + bytes);
        std::memcpy(blob.data() + offset, t.data.data(), bytes);
        tens[name] = {
            {"shape", t.shape},
            {"dtype", "f32"},
            {"file", blob_name},
            {"offset", offset},
        };
    }

    {
        std::ofstream out(dir + "/" + blob_name, std::ios::binary);
        if (!out) throw std::runtime_error("tensor archive: cannot write blob in '" + dir + "'");
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }

    nlohmann::json manifest;
    manifest["format"] = "vista-tensors-v1";
    manifest["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
    manifest["tensors"] = tens;
    manifest["checksums"] = {{blob_name, hex_u64(fnv1a64(blob.data(), blob.size()))}};

    std::ofstream out(dir + "/manifest.json");
    if (!out) throw std::runtime_error("tensor archive: cannot write manifest in '" + dir + "'");
    out << manifest.dump(2) << "\n";
}

TensorArchive TensorArchive::load(const std::string& manifest_path) {
    fs::path mpath(manifest_path);
    if (fs::is_directory(mpath)) mpath /= "manifest.json";
    std::ifstream in(mpath);
    if (!in) throw std::runtime_error("tensor archive: cannot open manifest '" + mpath.string() + "'");
    nlohmann::json manifest = nlohmann::json::parse(in);

    if (manifest.value("format", "") != "vista-tensors-v1") {
        throw std::runtime_error("tensor archive: unknown format in '" + mpath.string() + "'");
    }

    fs::path dir = mpath.parent_path();
    std::map<std::string, std::vector<char>> blobs;
    for (auto& [file, sum] : manifest.at("checksums").items()) {
        auto bytes = read_file_bytes((dir / file).string());
        std::string actual = hex_u64(fnv1a64(bytes.data(), bytes.size()));
        if (actual != sum.get<std::string>()) {
            throw std::runtime_error("tensor archive: checksum mismatch for blob '" + file +
                                     "' (expected " + sum.get<std::string>() + ", got " + actual + ")");
        }
        blobs[file] = std::move(bytes);
    }

    TensorArchive ar;
    ar.meta = manifest.value("meta", nlohmann::json::object());
    for (auto& [name, spec] : manifest.at("tensors").items()) {
        if (spec.value("dtype", "") != "f32") {
            throw std::runtime_error("tensor archive: unsupported dtype for tensor '" + name + "'");
        }
        Tensor t;
        t.shape = spec.at("shape").get<std::vector<int64_t>>();
        int64_t n = t.numel();
        std::string file = spec.at("file").get<std::string>();
        size_t offset = spec.at("offset").get<size_t>();
        auto bit = blobs.find(file);
        if (bit == blobs.end()) {
            throw std::runtime_error("tensor archive: tensor '" + name + "' references missing blob '" + file + "'");
        }
        const auto& blob = bit->second;
        size_t bytes = static_cast<size_t>(n) * sizeof(float);
        if (offset + bytes > blob.size()) {
            throw std::runtime_error("tensor archive: tensor '" + name + "' extends past end of blob '" + file + "'");
        }
        t.data.resize(static_cast<size_t>(n));
        std::memcpy(t.data.data(), blob.data() + offset, bytes);
        for (float v : t.data) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("tensor archive: non-finite value in tensor '" + name + "'");
            }
        }
        ar.tensors_[name] = std::move(t);
    }
    return ar;
}

uint64_t TensorArchive::content_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : tensors_) {
        h = fnv1a64(name.data(), name.size(), h);
        h = fnv1a64(t.shape.data(), t.shape.size() * sizeof(int64_t), h);
        h = fnv1a64(t.data.data(), t.data.size() * sizeof(float), h);
    }
    return h;
}

} // namespace vista
