#include "icupred/window.hpp"

namespace icupred {

namespace {
constexpr std::array<std::string_view, kWindowCount> kLabels = {
    "0-2", "2-4", "4-6", "6-12", "ABOVE_12"};
}

std::string_view window_label(Window w) {
  return kLabels[static_cast<std::size_t>(window_ordinal(w))];
}

Window parse_window(std::string_view label) {
  for (int i = 0; i < kWindowCount; ++i) {
    if (label == kLabels[static_cast<std::size_t>(i)]) {
      return static_cast<Window>(i);
    }
  }
  throw DataError("unparseable window label: '" + std::string(label) + "'");
}

}  // namespace icupred
