#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace vista {

// Weight archive: a JSON manifest listing tensor name -> {shape, dtype, file,
// offset} next to raw little-endian IEEE-754 f32 blobs (row-major). Each blob
// file carries a 64-bit FNV-1a checksum in the manifest which is verified on
// load. Loads are byte-deterministic.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
};

class TensorArchive {
public:
    // `meta` is free-form archive metadata stored under manifest["meta"].
    nlohmann::json meta;

    void add(const std::string& name, std::vector<int64_t> shape, std::vector<float> data);

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const Tensor& at(const std::string& name) const;
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    // Writes <dir>/manifest.json plus a single blob file <dir>/weights.bin.
    void save(const std::string& dir) const;

    // Loads from a manifest path (or a directory containing manifest.json).
    // Verifies blob checksums, shape/byte-count consistency and that every
    // value is finite; errors name the offending tensor or file.
    static TensorArchive load(const std::string& manifest_path);

    // Checksum over all tensors (names, shapes, raw bytes) in name order.
    uint64_t content_checksum() const;

private:
    std::map<std::string, Tensor> tensors_;
};

} // namespace vista
