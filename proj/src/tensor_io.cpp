#include "sedw/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sedw {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'D', 'W', 'T', 'N', 'S', '1'};

void write_u32(std::ostream& os, std::uint32_t x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

void write_u64(std::ostream& os, std::uint64_t x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(x));
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t x = 0;
    is.read(reinterpret_cast<char*>(&x), sizeof(x));
    if (!is) throw std::runtime_error("tensor archive: truncated file");
    return x;
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t x = 0;
    is.read(reinterpret_cast<char*>(&x), sizeof(x));
    if (!is) throw std::runtime_error("tensor archive: truncated file");
    return x;
}

std::string read_string(std::istream& is) {
    std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw std::runtime_error("tensor archive: truncated file");
    return s;
}

} // namespace

Tensor Tensor::from_matrix(const Matrix& m) {
    Tensor t;
    t.dims = {m.rows(), m.cols()};
    t.data = m.values();
    return t;
}

Matrix Tensor::to_matrix() const {
    if (dims.size() != 2) throw std::runtime_error("tensor is not 2-d");
    Matrix m(dims[0], dims[1]);
    m.values() = data;
    return m;
}

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

void TensorArchive::put(const std::string& name, Tensor t) {
    if (t.element_count() != t.data.size())
        throw std::invalid_argument("tensor dims do not match payload size");
    for (auto& [n, existing] : tensors_) {
        if (n == name) {
            existing = std::move(t);
            return;
        }
    }
    tensors_.emplace_back(name, std::move(t));
}

const Tensor* TensorArchive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors_)
        if (n == name) return &t;
    return nullptr;
}

const Tensor& TensorArchive::get(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) throw std::runtime_error("tensor archive: missing tensor '" + name + "'");
    return *t;
}

void TensorArchive::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_u32(os, static_cast<std::uint32_t>(attrs.size()));
    for (const auto& [k, v] : attrs) {
        write_string(os, k);
        write_string(os, v);
    }
    write_u32(os, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, t] : tensors_) {
        write_string(os, name);
        write_u32(os, static_cast<std::uint32_t>(t.dims.size()));
        for (std::size_t d : t.dims) write_u64(os, d);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a sedw tensor archive: " + path);
    TensorArchive a;
    const std::uint32_t n_attrs = read_u32(is);
    for (std::uint32_t i = 0; i < n_attrs; ++i) {
        std::string k = read_string(is);
        a.attrs[k] = read_string(is);
    }
    const std::uint32_t n_tensors = read_u32(is);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = read_string(is);
        Tensor t;
        const std::uint32_t ndim = read_u32(is);
        t.dims.resize(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d) t.dims[d] = static_cast<std::size_t>(read_u64(is));
        t.data.resize(t.element_count());
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!is) throw std::runtime_error("tensor archive: truncated payload in " + path);
        a.tensors_.emplace_back(std::move(name), std::move(t));
    }
    return a;
}

} // namespace sedw
