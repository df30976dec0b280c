#pragma once

#include <array>
#include <optional>
#include <string>

#include "scarfcn/anatomy.hpp"

namespace scarfcn {

struct BullseyeValues {
  std::array<int, kSegments> predicted{};
  std::optional<std::array<double, kSegments>> scores;  // scar-minus-no-scar logit margins
  std::optional<std::array<int, kSegments>> labels;     // outlined when present
  std::string title;
};

/// Three rings of six sectors, basal outermost, anterior at 12 o'clock with
/// septal walls on the left. Scar sectors are filled; when scores are given
/// the fill opacity follows the logistic of the margin. Output depends only
/// on the input values.
std::string render_bullseye_svg(const BullseyeValues& values);

}  // namespace scarfcn
