#include "perspective/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace perspective {

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
std::size_t Tensor<T>::count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> shape, T fill) : shape_(std::move(shape)), values_(count(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(std::vector<int> shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (count(shape_) != values_.size())
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(values_.size()) + " values");
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(values_.begin(), values_.end(), v);
}

template <typename T>
void Tensor<T>::reshape(std::vector<int> shape) {
  if (count(shape) != values_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

template <typename T>
Tensor<T>& ParamSet<T>::add(std::string name, Tensor<T> value) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

template <typename T>
Tensor<T>& ParamSet<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return entries_[it->second].second;
}

template <typename T>
const Tensor<T>& ParamSet<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return entries_[it->second].second;
}

template <typename T>
std::size_t ParamSet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : entries_) out.add(name, Tensor<T>(t.shape()));
  return out;
}

template <typename T>
void ParamSet<T>::set_zero() {
  for (auto& e : entries_) e.second.fill(T(0));
}

template <typename T>
void ParamSet<T>::check_compatible(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size())
    throw ShapeError("parameter sets differ in size: " + std::to_string(entries_.size()) + " vs " +
                     std::to_string(other.entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.first != b.first) throw ShapeError("parameter order differs: '" + a.first + "' vs '" + b.first + "'");
    if (a.second.shape() != b.second.shape())
      throw ShapeError("parameter '" + a.first + "' has shape " + shape_string(a.second.shape()) + ", expected " +
                       shape_string(b.second.shape()));
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class ParamSet<float>;
template class ParamSet<double>;

}  // namespace perspective
