#include "scarfcn/bullseye.hpp"

#include <string>

#include "scarfcn/error.hpp"

namespace scarfcn {

std::string to_string(Shape3 s) {
  return "(" + std::to_string(s.channels) + "," + std::to_string(s.rows) + "," +
         std::to_string(s.cols) + ")";
}

GridTensor::GridTensor(int channels, int rows, int cols, double fill)
    : shape_{channels, rows, cols} {
  if (channels < 0 || rows < 0 || cols < 0) throw ShapeError("negative tensor dimension");
  data_.assign(shape_.size(), fill);
}

GridTensor::GridTensor(Shape3 shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor " + to_string(shape) + " needs " + std::to_string(shape_.size()) +
                     " values, got " + std::to_string(data_.size()));
  }
}

BatchTensor::BatchTensor(int n, Shape3 item, double fill) : n_(n), item_(item) {
  if (n < 0) throw ShapeError("negative batch size");
  data_.assign(static_cast<std::size_t>(n) * item.size(), fill);
}

BatchTensor BatchTensor::from_item(const GridTensor& g) {
  BatchTensor b(1, g.shape());
  std::copy(g.data().begin(), g.data().end(), b.data_.begin());
  return b;
}

GridTensor BatchTensor::item_tensor(int i) const {
  const auto s = item(i);
  return GridTensor(item_, std::vector<double>(s.begin(), s.end()));
}

std::string_view padding_name(PaddingMode m) {
  return m == PaddingMode::Horizontal ? "horizontal" : "none";
}

PaddingMode parse_padding(std::string_view s) {
  if (s == "horizontal") return PaddingMode::Horizontal;
  if (s == "none") return PaddingMode::None;
  throw ConfigError("unknown padding mode '" + std::string(s) + "' (expected none or horizontal)");
}

GridTensor to_grid(const std::vector<std::vector<double>>& traces, const SegmentGridMap& map) {
  if (traces.size() != kSegments) {
    throw InputError("to_grid: expected 18 traces, got " + std::to_string(traces.size()));
  }
  const std::size_t t = traces[0].size();
  std::vector<double> flat;
  flat.reserve(t * kSegments);
  for (std::size_t s = 0; s < traces.size(); ++s) {
    if (traces[s].size() != t) {
      throw InputError("to_grid: segment " + std::to_string(s + 1) + " has " +
                       std::to_string(traces[s].size()) + " samples, segment 1 has " +
                       std::to_string(t));
    }
    flat.insert(flat.end(), traces[s].begin(), traces[s].end());
  }
  return to_grid(flat, static_cast<int>(t), map);
}

GridTensor to_grid(std::span<const double> strain, int time_points, const SegmentGridMap& map) {
  if (time_points < 1 || strain.size() != static_cast<std::size_t>(time_points) * kSegments) {
    throw InputError("to_grid: expected 18 x " + std::to_string(time_points) + " values, got " +
                     std::to_string(strain.size()));
  }
  GridTensor g(time_points, kGridRows, kGridCols);
  write_padded_grid(strain, time_points, 0, map, g.data());
  return g;
}

std::vector<std::vector<double>> from_grid(const GridTensor& grid, const SegmentGridMap& map) {
  if (grid.rows() != kGridRows || grid.cols() != kGridCols) {
    throw InputError("from_grid: expected (T,3,6), got " + to_string(grid.shape()));
  }
  std::vector<std::vector<double>> traces(kSegments,
                                          std::vector<double>(static_cast<std::size_t>(grid.channels())));
  for (int s = 1; s <= kSegments; ++s) {
    const GridCell cell = map.cell(s);
    auto& out = traces[s - 1];
    for (int t = 0; t < grid.channels(); ++t) out[t] = grid.at(t, cell.row, cell.col);
  }
  return traces;
}

GridTensor pad_horizontal(const GridTensor& grid, int p) {
  if (p < 0 || p > grid.cols()) {
    throw ConfigError("pad_horizontal: p = " + std::to_string(p) + " outside 0.." +
                      std::to_string(grid.cols()));
  }
  const int w = grid.cols();
  GridTensor out(grid.channels(), grid.rows(), w + 2 * p);
  for (int c = 0; c < grid.channels(); ++c) {
    for (int r = 0; r < grid.rows(); ++r) {
      for (int k = 0; k < w + 2 * p; ++k) {
        out.at(c, r, k) = grid.at(c, r, (k - p + w) % w);
      }
    }
  }
  return out;
}

void write_padded_grid(std::span<const double> strain, int time_points, int p,
                       const SegmentGridMap& map, std::span<double> out) {
  if (p < 0 || p > kGridCols) {
    throw ConfigError("padding " + std::to_string(p) + " outside 0..6");
  }
  const int w = kGridCols + 2 * p;
  const std::size_t plane = static_cast<std::size_t>(kGridRows) * w;
  if (out.size() != plane * static_cast<std::size_t>(time_points) ||
      strain.size() != static_cast<std::size_t>(time_points) * kSegments) {
    throw ShapeError("write_padded_grid: buffer sizes disagree with T = " +
                     std::to_string(time_points));
  }
  for (int row = 0; row < kGridRows; ++row) {
    for (int k = 0; k < w; ++k) {
      const int col = (k - p + kGridCols) % kGridCols;
      const int seg = map.segment_at(row, col);
      const double* src = strain.data() + static_cast<std::size_t>(seg - 1) * time_points;
      double* dst = out.data() + static_cast<std::size_t>(row) * w + k;
      for (int t = 0; t < time_points; ++t) dst[t * plane] = src[t];
    }
  }
}

}  // namespace scarfcn
