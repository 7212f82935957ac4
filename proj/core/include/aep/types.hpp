#pragma once

#include <string_view>

namespace aep {

/// Endpointing configuration chosen for an utterance.
enum class Action { standard = 0, relaxed = 1 };

inline constexpr int kActionCount = 2;

/// Class1: the standard configuration cuts the utterance off early, so the
/// relaxed configuration is the better choice.
enum class Class { class0 = 0, class1 = 1 };

inline constexpr std::size_t index(Action a) noexcept { return static_cast<std::size_t>(a); }

inline constexpr Action action_for(Class c) noexcept {
  return c == Class::class1 ? Action::relaxed : Action::standard;
}

std::string_view to_string(Action a);
std::string_view to_string(Class c);

}  // namespace aep
