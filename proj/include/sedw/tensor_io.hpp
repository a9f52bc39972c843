#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sedw/matrix.hpp"

namespace sedw {

// Container for the on-disk tensor format shared by feature caches, CNMF
// dictionaries, pseudo labels and model checkpoints. Layout (little-endian):
//
//   magic   8 bytes  "SEDWTNS1"
//   u32     attribute count
//            per attribute: u32 key length, key bytes, u32 value length, value bytes
//   u32     tensor count
//            per tensor: u32 name length, name bytes,
//                        u32 ndim, u64 dims[ndim],
//                        float64 payload, row-major
struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<double> data;

    static Tensor from_matrix(const Matrix& m);
    Matrix to_matrix() const;
    std::size_t element_count() const;
};

class TensorArchive {
public:
    std::map<std::string, std::string> attrs;

    void put(const std::string& name, Tensor t);
    void put(const std::string& name, const Matrix& m) { put(name, Tensor::from_matrix(m)); }
    const Tensor& get(const std::string& name) const;
    const Tensor* find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }

    const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

    void save(const std::string& path) const;
    static TensorArchive load(const std::string& path);

private:
    std::vector<std::pair<std::string, Tensor>> tensors_;
};

} // namespace sedw
