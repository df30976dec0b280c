#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace scarfcn {

inline constexpr int kSegments = 18;
inline constexpr int kGridRows = 3;
inline constexpr int kGridCols = 6;

// Wall order around the ventricular circumference. Neighbouring enumerators
// are anatomical neighbours, and Anterolateral wraps back to Anterior.
enum class Wall { Anterior, Anteroseptal, Inferoseptal, Inferior, Inferolateral, Anterolateral };

enum class Ring { Basal, Mid, Apical };

enum class Territory { LAD, LCx, RCA };
inline constexpr std::array<Territory, 3> kTerritories = {Territory::LAD, Territory::LCx,
                                                          Territory::RCA};

// Segments are numbered 1..18: 1-6 basal, 7-12 mid, 13-18 apical, each ring
// walking the walls in `Wall` order.
void check_segment(int segment);
Wall wall_of(int segment);
Ring ring_of(int segment);
std::string segment_name(int segment);
std::string_view territory_name(Territory t);

struct GridCell {
  int row = 0;
  int col = 0;
  bool operator==(const GridCell&) const = default;
};

/// Bijection between the 18 segments and the cells of a 3x6 grid.
class SegmentGridMap {
 public:
  /// Row = ring (basal on top), column = wall.
  static SegmentGridMap standard();
  /// Throws ConfigError unless `cells` is a bijection onto the grid.
  static SegmentGridMap from_cells(const std::array<GridCell, kSegments>& cells);

  GridCell cell(int segment) const;
  int segment_at(int row, int col) const;

  nlohmann::json to_json() const;
  static SegmentGridMap from_json(const nlohmann::json& j);

  bool operator==(const SegmentGridMap&) const = default;

 private:
  std::array<GridCell, kSegments> cells_{};
  std::array<int, kSegments> inverse_{};  // row * kGridCols + col -> segment
};

/// Assignment of segments to coronary artery territories. Each territory keeps
/// an ordered segment list (basal to apical) which defines contiguity for
/// generated scar runs.
class TerritoryMap {
 public:
  /// anterior/anteroseptal -> LAD, inferoseptal/inferior -> RCA,
  /// inferolateral/anterolateral -> LCx, identically in all three rings.
  static TerritoryMap standard();
  /// Throws ConfigError unless the lists partition 1..18.
  static TerritoryMap from_lists(std::array<std::vector<int>, 3> lists);

  const std::vector<int>& segments(Territory t) const {
    return lists_[static_cast<int>(t)];
  }
  Territory territory_of(int segment) const;

  nlohmann::json to_json() const;
  static TerritoryMap from_json(const nlohmann::json& j);

  bool operator==(const TerritoryMap&) const = default;

 private:
  std::array<std::vector<int>, 3> lists_;
  std::array<Territory, kSegments> owner_{};
};

}  // namespace scarfcn
