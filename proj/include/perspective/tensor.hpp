#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace perspective {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const std::vector<int>& shape);

/// Dense row-major array. Value semantics; copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0));
  Tensor(std::vector<int> shape, std::vector<T> values);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  /// Element access for rank-2 tensors.
  T& at(int r, int c) { return values_[static_cast<std::size_t>(r * shape_[1] + c)]; }
  const T& at(int r, int c) const { return values_[static_cast<std::size_t>(r * shape_[1] + c)]; }

  void fill(T v);
  /// Same element count required.
  void reshape(std::vector<int> shape);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool operator==(const Tensor&) const = default;

  static std::size_t count(const std::vector<int>& shape);

 private:
  std::vector<int> shape_;
  std::vector<T> values_;
};

/// Named tensors with stable insertion order. Iteration order is the order
/// parameters were added, which fixes checkpoint layout and update order.
template <typename T>
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T>& add(std::string name, Tensor<T> value);
  bool contains(const std::string& name) const { return index_.contains(name); }
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Total scalar count across all tensors.
  std::size_t parameter_count() const;
  ParamSet zeros_like() const;
  void set_zero();
  /// Throws ShapeError unless names, order and shapes agree.
  void check_compatible(const ParamSet& other) const;

  bool operator==(const ParamSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = static_cast<To>(t[i]);
  return Tensor<To>(t.shape(), std::move(v));
}

template <typename To, typename From>
ParamSet<To> params_cast(const ParamSet<From>& p) {
  ParamSet<To> out;
  for (const auto& [name, t] : p) out.add(name, tensor_cast<To>(t));
  return out;
}

}  // namespace perspective
