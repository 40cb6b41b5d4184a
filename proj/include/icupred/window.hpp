#pragma once

#include <array>
#include <string_view>

#include "icupred/types.hpp"

namespace icupred {

/// The five admission windows, in temporal order. The underlying integer is
/// the ordinal, so operator< on the enum is the temporal order.
enum class Window : int {
  kW0_2 = 0,
  kW2_4 = 1,
  kW4_6 = 2,
  kW6_12 = 3,
  kAbove12 = 4,
};

inline constexpr int kWindowCount = 5;

inline constexpr std::array<Window, kWindowCount> kWindows = {
    Window::kW0_2, Window::kW2_4, Window::kW4_6, Window::kW6_12,
    Window::kAbove12};

std::string_view window_label(Window w);

/// Parses one of "0-2", "2-4", "4-6", "6-12", "ABOVE_12"; throws DataError
/// for anything else.
Window parse_window(std::string_view label);

inline int window_ordinal(Window w) { return static_cast<int>(w); }

}  // namespace icupred
