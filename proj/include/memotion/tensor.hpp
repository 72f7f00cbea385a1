#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace memotion {

// Dense row-major tensor of doubles. Ranks 1..4 are what the layer stack
// uses; rank 0 is an empty tensor.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<size_t>(count(shape_)), 0.0);
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static Tensor from(std::vector<int> shape, std::vector<double> values) {
        Tensor t;
        if (count(shape) != static_cast<int64_t>(values.size()))
            throw std::invalid_argument("Tensor::from: shape does not match value count");
        t.shape_ = std::move(shape);
        t.data_ = std::move(values);
        return t;
    }

    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    const std::vector<int>& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    double& at(int i) { return data_[idx1(i)]; }
    double at(int i) const { return data_[idx1(i)]; }
    double& at(int i, int j) { return data_[idx2(i, j)]; }
    double at(int i, int j) const { return data_[idx2(i, j)]; }
    double& at(int i, int j, int k) { return data_[idx3(i, j, k)]; }
    double at(int i, int j, int k) const { return data_[idx3(i, j, k)]; }
    double& at(int i, int j, int k, int l) { return data_[idx4(i, j, k, l)]; }
    double at(int i, int j, int k, int l) const { return data_[idx4(i, j, k, l)]; }

    void fill(double v) { data_.assign(data_.size(), v); }

    Tensor reshaped(std::vector<int> new_shape) const {
        if (count(new_shape) != size())
            throw std::invalid_argument("Tensor::reshaped: element count mismatch");
        Tensor t = *this;
        t.shape_ = std::move(new_shape);
        return t;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

    static int64_t count(const std::vector<int>& shape) {
        int64_t n = shape.empty() ? 0 : 1;
        for (int d : shape) n *= d;
        return n;
    }

private:
    size_t idx1(int i) const { return static_cast<size_t>(i); }
    size_t idx2(int i, int j) const {
        return static_cast<size_t>(i) * shape_[1] + j;
    }
    size_t idx3(int i, int j, int k) const {
        return (static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k;
    }
    size_t idx4(int i, int j, int k, int l) const {
        return ((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

}  // namespace memotion
