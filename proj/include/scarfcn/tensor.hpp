#pragma once

#include <span>
#include <string>
#include <vector>

namespace scarfcn {

struct Shape3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(rows) *
           static_cast<std::size_t>(cols);
  }
  bool operator==(const Shape3&) const = default;
};

std::string to_string(Shape3 s);

/// channels x rows x cols, row-major. Holds time-as-channels strain grids and
/// layer activations.
class GridTensor {
 public:
  GridTensor() = default;
  GridTensor(int channels, int rows, int cols, double fill = 0.0);
  /// Throws ShapeError if `data.size()` disagrees with `shape`.
  GridTensor(Shape3 shape, std::vector<double> data);

  Shape3 shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int rows() const { return shape_.rows; }
  int cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }

  double& at(int c, int r, int k) { return data_[index(c, r, k)]; }
  double at(int c, int r, int k) const { return data_[index(c, r, k)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const GridTensor&) const = default;

 private:
  std::size_t index(int c, int r, int k) const {
    return (static_cast<std::size_t>(c) * shape_.rows + r) * shape_.cols + k;
  }
  Shape3 shape_{};
  std::vector<double> data_;
};

/// A batch of equally shaped items stored back to back.
class BatchTensor {
 public:
  BatchTensor() = default;
  BatchTensor(int n, Shape3 item, double fill = 0.0);

  int batch() const { return n_; }
  Shape3 item_shape() const { return item_; }
  std::span<double> item(int i) {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(i) * item_.size(), item_.size());
  }
  std::span<const double> item(int i) const {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(i) * item_.size(),
                                                  item_.size());
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  static BatchTensor from_item(const GridTensor& g);
  GridTensor item_tensor(int i) const;

 private:
  int n_ = 0;
  Shape3 item_{};
  std::vector<double> data_;
};

}  // namespace scarfcn
