#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace medtx {

/// The four body-system target classes.
enum class BodySystem : std::uint8_t { Heart, Brain, Reproductive, Digestive };

inline constexpr std::size_t kNumClasses = 4;

/// Canonical class order. Index positions double as model output slots and
/// as the tie-break order for every argmax / plurality vote.
inline constexpr std::array<BodySystem, kNumClasses> kClassOrder{
    BodySystem::Heart, BodySystem::Brain, BodySystem::Reproductive,
    BodySystem::Digestive};

std::string_view to_string(BodySystem c);

/// Case-insensitive; surrounding whitespace ignored.
std::optional<BodySystem> parse_body_system(std::string_view name);

constexpr std::size_t class_index(BodySystem c) {
  return static_cast<std::size_t>(c);
}

}  // namespace medtx
