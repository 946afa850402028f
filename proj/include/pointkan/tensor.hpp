#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pointkan {

// Dense row-major tensor of 64-bit floats. All training arithmetic runs in
// f64; 32-bit values appear only in the on-disk formats.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(numel(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel(shape_) != data_.size()) {
            throw std::invalid_argument("Tensor: shape does not match data length");
        }
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static std::size_t numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const {
        assert(axis < shape_.size());
        return shape_[axis];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::size_t flat) {
        assert(flat < data_.size());
        return data_[flat];
    }
    double operator[](std::size_t flat) const {
        assert(flat < data_.size());
        return data_[flat];
    }

    // Row-major offset of a multi-index.
    template <class... Ix>
    std::size_t offset(Ix... ix) const {
        static_assert((std::is_integral_v<Ix> && ...), "indices must be integral");
        assert(sizeof...(ix) == shape_.size());
        std::size_t idx[] = {static_cast<std::size_t>(ix)...};
        std::size_t off = 0;
        for (std::size_t a = 0; a < sizeof...(ix); ++a) {
            assert(idx[a] < shape_[a]);
            off = off * shape_[a] + idx[a];
        }
        return off;
    }

    template <class... Ix>
    double& at(Ix... ix) { return data_[offset(ix...)]; }
    template <class... Ix>
    double at(Ix... ix) const { return data_[offset(ix...)]; }

    void fill(double v) {
        for (double& x : data_) x = v;
    }
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double x : data_) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : data_) m = std::max(m, std::abs(x));
        return m;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void check_shape(const Tensor& t, const std::vector<std::size_t>& expect,
                        const char* what) {
    if (t.shape() != expect) {
        throw std::invalid_argument(std::string(what) + ": unexpected tensor shape");
    }
}

}  // namespace pointkan
