#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "scarfcn/anatomy.hpp"
#include "scarfcn/tensor.hpp"

namespace scarfcn {

enum class PaddingMode { None, Horizontal };

std::string_view padding_name(PaddingMode m);
/// Accepts "none" or "horizontal"; throws ConfigError otherwise.
PaddingMode parse_padding(std::string_view s);

/// 18 traces (segment order) of length T -> (T, 3, 6) grid.
GridTensor to_grid(const std::vector<std::vector<double>>& traces,
                   const SegmentGridMap& map = SegmentGridMap::standard());
/// Same, from a contiguous [segment][time] block of 18*T values.
GridTensor to_grid(std::span<const double> strain, int time_points,
                   const SegmentGridMap& map = SegmentGridMap::standard());

/// Inverse of to_grid.
std::vector<std::vector<double>> from_grid(const GridTensor& grid,
                                           const SegmentGridMap& map = SegmentGridMap::standard());

/// Circular wrap of the column axis: output columns are
/// [6-p .. 5, 0 .. 5, 0 .. p-1]. Requires 0 <= p <= 6.
GridTensor pad_horizontal(const GridTensor& grid, int p);

/// Builds the padded grid for one patient directly into `out`
/// (T * 3 * (6 + 2p) values).
void write_padded_grid(std::span<const double> strain, int time_points, int p,
                       const SegmentGridMap& map, std::span<double> out);

}  // namespace scarfcn
