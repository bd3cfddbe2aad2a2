#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ham/mat.hpp"

namespace ham {

struct NamedTensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> data;

    static NamedTensor from_mat(const Mat& m);
    static NamedTensor from_vector(std::span<const double> v);
    Mat to_mat() const;                   // rank must be 2
    std::vector<double> to_vector() const;  // rank must be 1
    std::size_t element_count() const;
};

// Named-tensor container. Layout: magic "HAMW", u32 entry count, then per
// entry u16 name length, name bytes, u8 rank, u32 dims[rank], f64 payload.
// All integers and floats little-endian.
class TensorFile {
public:
    void put(const std::string& name, NamedTensor t);
    bool contains(const std::string& name) const;
    const NamedTensor& get(const std::string& name) const;
    const std::vector<std::pair<std::string, NamedTensor>>& entries() const {
        return entries_;
    }

    std::vector<std::uint8_t> serialize() const;
    static TensorFile deserialize(std::span<const std::uint8_t> bytes);

    void save(const std::string& path) const;
    static TensorFile load(const std::string& path);

private:
    std::vector<std::pair<std::string, NamedTensor>> entries_;
};

}  // namespace ham
