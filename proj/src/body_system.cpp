#include "medtx/body_system.hpp"

#include "text_util.hpp"

namespace medtx {

std::string_view to_string(BodySystem c) {
  switch (c) {
    case BodySystem::Heart: return "Heart";
    case BodySystem::Brain: return "Brain";
    case BodySystem::Reproductive: return "Reproductive";
    case BodySystem::Digestive: return "Digestive";
  }
  return "?";
}

std::optional<BodySystem> parse_body_system(std::string_view name) {
  const std::string key = detail::ascii_lower(detail::trim(name));
  for (BodySystem c : kClassOrder) {
    if (key == detail::ascii_lower(to_string(c))) return c;
  }
  return std::nullopt;
}

}  // namespace medtx
