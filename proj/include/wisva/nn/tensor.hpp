#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "wisva/error.hpp"

namespace wisva::nn {

/// Row-major buffer with dims (N, C, H, W) or (N, F).
template <typename T>
struct TensorBuffer {
  std::vector<int> dims;
  std::vector<T> data;

  TensorBuffer() = default;
  explicit TensorBuffer(std::vector<int> d, T fill = T{}) : dims(std::move(d)), data(count(dims), fill) {}

  static std::size_t count(const std::vector<int>& d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t size() const noexcept { return data.size(); }
  int dim(std::size_t k) const { return dims.at(k); }
  T* ptr() noexcept { return data.data(); }
  const T* ptr() const noexcept { return data.data(); }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  friend bool operator==(const TensorBuffer&, const TensorBuffer&) = default;
};

inline void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

/// Named slice of a flat parameter vector.
struct ParamInfo {
  std::string name;
  std::vector<int> dims;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Flat parameter storage. Layers keep offsets into it, gradients and
/// optimizer moments are vectors of the same length.
template <typename T>
class ParamStore {
 public:
  std::size_t add(const std::string& name, std::vector<int> dims) {
    ParamInfo p;
    p.name = name;
    p.size = TensorBuffer<T>::count(dims);
    p.dims = std::move(dims);
    p.offset = values_.size();
    values_.resize(values_.size() + p.size, T{});
    infos_.push_back(std::move(p));
    return infos_.back().offset;
  }

  std::size_t size() const noexcept { return values_.size(); }
  std::vector<T>& values() noexcept { return values_; }
  const std::vector<T>& values() const noexcept { return values_; }
  const std::vector<ParamInfo>& infos() const noexcept { return infos_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  const ParamInfo* find(const std::string& name) const {
    for (const auto& p : infos_)
      if (p.name == name) return &p;
    return nullptr;
  }

 private:
  std::vector<T> values_;
  std::vector<ParamInfo> infos_;
};

}  // namespace wisva::nn
