#include "ham/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace ham {

namespace {

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f64s(std::span<const double> v) { raw(v.data(), v.size() * 8); }

private:
    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
    std::size_t offset() const { return pos_; }
    void raw(void* p, std::size_t n, const char* what) {
        if (pos_ + n > in_.size())
            throw FormatError(std::string("truncated payload reading ") + what, pos_);
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8(const char* what) { std::uint8_t v; raw(&v, 1, what); return v; }
    std::uint16_t u16(const char* what) { std::uint16_t v; raw(&v, 2, what); return v; }
    std::uint32_t u32(const char* what) { std::uint32_t v; raw(&v, 4, what); return v; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

NamedTensor NamedTensor::from_mat(const Mat& m) {
    NamedTensor t;
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.assign(m.data().begin(), m.data().end());
    return t;
}

NamedTensor NamedTensor::from_vector(std::span<const double> v) {
    NamedTensor t;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.data.assign(v.begin(), v.end());
    return t;
}

Mat NamedTensor::to_mat() const {
    if (dims.size() != 2) throw ShapeError("to_mat: tensor rank != 2");
    Mat m(dims[0], dims[1]);
    std::copy(data.begin(), data.end(), m.data().begin());
    return m;
}

std::vector<double> NamedTensor::to_vector() const {
    if (dims.size() != 1) throw ShapeError("to_vector: tensor rank != 1");
    return data;
}

std::size_t NamedTensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void TensorFile::put(const std::string& name, NamedTensor t) {
    if (t.data.size() != t.element_count())
        throw ShapeError("put: payload size does not match dims for " + name);
    for (auto& [n, e] : entries_) {
        if (n == name) {
            e = std::move(t);
            return;
        }
    }
    entries_.emplace_back(name, std::move(t));
}

bool TensorFile::contains(const std::string& name) const {
    for (auto& [n, e] : entries_)
        if (n == name) return true;
    return false;
}

const NamedTensor& TensorFile::get(const std::string& name) const {
    for (auto& [n, e] : entries_)
        if (n == name) return e;
    throw ValueError("tensor not found: " + name);
}

std::vector<std::uint8_t> TensorFile::serialize() const {
    std::vector<std::uint8_t> out;
    ByteWriter w(out);
    w.raw("HAMW", 4);
    w.u32(static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, t] : entries_) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        w.u8(static_cast<std::uint8_t>(t.dims.size()));
        for (auto d : t.dims) w.u32(d);
        w.f64s(t.data);
    }
    return out;
}

TensorFile TensorFile::deserialize(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    char magic[4];
    r.raw(magic, 4, "magic");
    if (std::memcmp(magic, "HAMW", 4) != 0)
        throw FormatError("bad magic, expected HAMW", 0);
    const std::uint32_t count = r.u32("entry count");
    TensorFile f;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16("name length");
        std::string name(name_len, '\0');
        r.raw(name.data(), name_len, "name");
        const std::uint8_t rank = r.u8("rank");
        NamedTensor t;
        t.dims.resize(rank);
        for (std::uint8_t d = 0; d < rank; ++d) t.dims[d] = r.u32("dims");
        t.data.resize(t.element_count());
        r.raw(t.data.data(), t.data.size() * 8, "payload");
        f.entries_.emplace_back(std::move(name), std::move(t));
    }
    return f;
}

void TensorFile::save(const std::string& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
}

TensorFile TensorFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace ham
