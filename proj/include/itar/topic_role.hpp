#pragma once

#include <string_view>

namespace itar {

// domain: free sparse topic; background: general-lexicon topic excluded from
// quality metrics; fixed: held to a banked good column.
enum class TopicRole { domain, background, fixed };

constexpr std::string_view to_string(TopicRole role) {
  switch (role) {
    case TopicRole::domain: return "domain";
    case TopicRole::background: return "background";
    case TopicRole::fixed: return "fixed";
  }
  return "domain";
}

}  // namespace itar
