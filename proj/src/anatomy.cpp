#include "scarfcn/anatomy.hpp"

#include <algorithm>

#include "scarfcn/error.hpp"

namespace scarfcn {

namespace {

constexpr std::array<std::string_view, 6> kWallNames = {
    "anterior", "anteroseptal", "inferoseptal", "inferior", "inferolateral", "anterolateral"};
constexpr std::array<std::string_view, 3> kRingNames = {"basal", "mid", "apical"};

Territory parse_territory(const std::string& s) {
  if (s == "LAD") return Territory::LAD;
  if (s == "LCx") return Territory::LCx;
  if (s == "RCA") return Territory::RCA;
  throw ConfigError("unknown territory '" + s + "' (expected LAD, LCx or RCA)");
}

}  // namespace

void check_segment(int segment) {
  if (segment < 1 || segment > kSegments) {
    throw InputError("segment " + std::to_string(segment) + " outside 1.." +
                     std::to_string(kSegments));
  }
}

Wall wall_of(int segment) {
  check_segment(segment);
  return static_cast<Wall>((segment - 1) % 6);
}

Ring ring_of(int segment) {
  check_segment(segment);
  return static_cast<Ring>((segment - 1) / 6);
}

std::string segment_name(int segment) {
  return std::string(kRingNames[static_cast<int>(ring_of(segment))]) + " " +
         std::string(kWallNames[static_cast<int>(wall_of(segment))]);
}

std::string_view territory_name(Territory t) {
  switch (t) {
    case Territory::LAD: return "LAD";
    case Territory::LCx: return "LCx";
    case Territory::RCA: return "RCA";
  }
  return "?";
}

SegmentGridMap SegmentGridMap::standard() {
  std::array<GridCell, kSegments> cells{};
  for (int s = 1; s <= kSegments; ++s) {
    cells[s - 1] = {static_cast<int>(ring_of(s)), static_cast<int>(wall_of(s))};
  }
  return from_cells(cells);
}

SegmentGridMap SegmentGridMap::from_cells(const std::array<GridCell, kSegments>& cells) {
  SegmentGridMap m;
  m.cells_ = cells;
  m.inverse_.fill(0);
  for (int s = 1; s <= kSegments; ++s) {
    const GridCell c = cells[s - 1];
    if (c.row < 0 || c.row >= kGridRows || c.col < 0 || c.col >= kGridCols) {
      throw ConfigError("grid map: segment " + std::to_string(s) + " mapped outside the 3x6 grid");
    }
    int& slot = m.inverse_[c.row * kGridCols + c.col];
    if (slot != 0) {
      throw ConfigError("grid map: segments " + std::to_string(slot) + " and " +
                        std::to_string(s) + " share a cell");
    }
    slot = s;
  }
  return m;
}

GridCell SegmentGridMap::cell(int segment) const {
  check_segment(segment);
  return cells_[segment - 1];
}

int SegmentGridMap::segment_at(int row, int col) const {
  if (row < 0 || row >= kGridRows || col < 0 || col >= kGridCols) {
    throw InputError("grid cell (" + std::to_string(row) + "," + std::to_string(col) +
                     ") outside the 3x6 grid");
  }
  return inverse_[row * kGridCols + col];
}

nlohmann::json SegmentGridMap::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (int s = 1; s <= kSegments; ++s) {
    j.push_back({{"segment", s}, {"row", cells_[s - 1].row}, {"col", cells_[s - 1].col}});
  }
  return j;
}

SegmentGridMap SegmentGridMap::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != kSegments) {
    throw ConfigError("grid map must be an array of 18 {segment,row,col} entries");
  }
  std::array<GridCell, kSegments> cells{};
  std::array<bool, kSegments> seen{};
  for (const auto& e : j) {
    const int s = e.at("segment").get<int>();
    if (s < 1 || s > kSegments || seen[s - 1]) {
      throw ConfigError("grid map: bad or duplicate segment " + std::to_string(s));
    }
    seen[s - 1] = true;
    cells[s - 1] = {e.at("row").get<int>(), e.at("col").get<int>()};
  }
  return from_cells(cells);
}

TerritoryMap TerritoryMap::standard() {
  return from_lists({std::vector<int>{1, 2, 7, 8, 13, 14}, std::vector<int>{5, 6, 11, 12, 17, 18},
                     std::vector<int>{3, 4, 9, 10, 15, 16}});
}

TerritoryMap TerritoryMap::from_lists(std::array<std::vector<int>, 3> lists) {
  TerritoryMap m;
  std::array<bool, kSegments> seen{};
  for (int t = 0; t < 3; ++t) {
    if (lists[t].empty()) {
      throw ConfigError("territory map: " + std::string(territory_name(static_cast<Territory>(t))) +
                        " has no segments");
    }
    for (int s : lists[t]) {
      if (s < 1 || s > kSegments) {
        throw ConfigError("territory map: segment " + std::to_string(s) + " outside 1..18");
      }
      if (seen[s - 1]) {
        throw ConfigError("territory map: segment " + std::to_string(s) + " assigned twice");
      }
      seen[s - 1] = true;
      m.owner_[s - 1] = static_cast<Territory>(t);
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw ConfigError("territory map does not cover all 18 segments");
  }
  m.lists_ = std::move(lists);
  return m;
}

Territory TerritoryMap::territory_of(int segment) const {
  check_segment(segment);
  return owner_[segment - 1];
}

nlohmann::json TerritoryMap::to_json() const {
  nlohmann::json j;
  for (Territory t : kTerritories) j[std::string(territory_name(t))] = segments(t);
  return j;
}

TerritoryMap TerritoryMap::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("territory map must be a JSON object");
  std::array<std::vector<int>, 3> lists;
  for (const auto& [key, value] : j.items()) {
    lists[static_cast<int>(parse_territory(key))] = value.get<std::vector<int>>();
  }
  return from_lists(std::move(lists));
}

}  // namespace scarfcn
