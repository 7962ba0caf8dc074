#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace hithar {

/// Five behavioral action classes. The numeric order is the order used by
/// class-weight vectors, confusion matrices and every CSV/JSON export.
enum class Action : int {
  ObjectTransfer = 0,
  TaskOperation = 1,
  Stationary = 2,
  Locomotion = 3,
  Search = 4,
};
inline constexpr int kNumActions = 5;

/// Eight activity scenarios, in class-weight order.
enum class Scenario : int {
  Cooking = 0,
  Carpentry = 1,
  Cleaning = 2,
  DeskWork = 3,
  MechanicalRepair = 4,
  PlayingInstrument = 5,
  WalkingIndoors = 6,
  WalkingOutdoors = 7,
};
inline constexpr int kNumScenarios = 8;

inline constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "ObjectTransfer", "TaskOperation", "Stationary", "Locomotion", "Search"};

inline constexpr std::array<std::string_view, kNumActions> kActionShortNames = {
    "OT", "TO", "ST", "LO", "SE"};

inline constexpr std::array<std::string_view, kNumScenarios> kScenarioNames = {
    "Cooking",          "Carpentry",         "Cleaning",       "DeskWork",
    "MechanicalRepair", "PlayingInstrument", "WalkingIndoors", "WalkingOutdoors"};

inline std::string_view to_string(Action a) { return kActionNames[static_cast<int>(a)]; }
inline std::string_view to_string(Scenario s) { return kScenarioNames[static_cast<int>(s)]; }

namespace detail {
// Case-insensitive comparison that ignores spaces, underscores and dashes,
// so "Object Transfer", "object_transfer" and "ObjectTransfer" all match.
inline std::string squash(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' || c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}
}  // namespace detail

inline std::optional<Action> parse_action(std::string_view s) {
  const std::string key = detail::squash(s);
  for (int i = 0; i < kNumActions; ++i) {
    if (detail::squash(kActionNames[i]) == key || detail::squash(kActionShortNames[i]) == key)
      return static_cast<Action>(i);
  }
  return std::nullopt;
}

inline std::optional<Scenario> parse_scenario(std::string_view s) {
  const std::string key = detail::squash(s);
  for (int i = 0; i < kNumScenarios; ++i) {
    if (detail::squash(kScenarioNames[i]) == key) return static_cast<Scenario>(i);
  }
  return std::nullopt;
}

inline constexpr int index(Action a) { return static_cast<int>(a); }
inline constexpr int index(Scenario s) { return static_cast<int>(s); }

}  // namespace hithar
