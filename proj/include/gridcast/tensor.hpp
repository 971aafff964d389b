#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "gridcast/util.hpp"

namespace gridcast {

/// Dense row-major tensor with a runtime shape. The whole pipeline moves
/// uint8 tensors around; float tensors only appear in analysis outputs.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, T fill = T{})
        : shape_(std::move(shape)), data_(checked_volume(shape_), fill) {}

    Tensor(std::initializer_list<std::size_t> shape, T fill = T{})
        : Tensor(std::vector<std::size_t>(shape), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_volume(shape_)) {
            throw InvalidInputError("tensor data size does not match shape");
        }
    }

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    template <typename... Ix>
    T& operator()(Ix... ix) {
        return data_[offset(ix...)];
    }

    template <typename... Ix>
    const T& operator()(Ix... ix) const {
        return data_[offset(ix...)];
    }

    template <typename... Ix>
    std::size_t offset(Ix... ix) const {
        static_assert(((std::is_integral_v<Ix> || std::is_enum_v<Ix>)&&...));
        const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        std::size_t off = 0;
        for (std::size_t d = 0; d < sizeof...(ix); ++d) off = off * shape_[d] + idx[d];
        return off;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::string s = "(";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }

    std::string shape_string() const { return shape_string(shape_); }

private:
    static std::size_t checked_volume(const std::vector<std::size_t>& shape) {
        std::size_t v = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw InvalidInputError("tensor dimensions must be positive");
            v *= d;
        }
        return shape.empty() ? 0 : v;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

using ByteTensor = Tensor<std::uint8_t>;

}  // namespace gridcast
