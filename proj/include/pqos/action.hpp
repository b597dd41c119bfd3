#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pqos {

// LiDAR compression alternatives, ordered by aggressiveness: raw compression
// of the full cloud, semantic compression with road points removed, and
// aggressive semantic compression keeping only dynamic elements.
enum class CompressionAction : int {
    kRaw = 0,
    kSemantic = 1,
    kAggressive = 2,
};

inline constexpr int kActionCount = 3;

inline constexpr std::array<CompressionAction, kActionCount> kAllActions = {
    CompressionAction::kRaw,
    CompressionAction::kSemantic,
    CompressionAction::kAggressive,
};

inline constexpr std::string_view action_label(CompressionAction a) {
    switch (a) {
        case CompressionAction::kRaw: return "C-R";
        case CompressionAction::kSemantic: return "C-SC";
        case CompressionAction::kAggressive: return "C-SA";
    }
    return "?";
}

inline std::optional<CompressionAction> parse_action(std::string_view text) {
    for (auto a : kAllActions) {
        if (text == action_label(a)) return a;
    }
    return std::nullopt;
}

inline CompressionAction action_from_index(int index) {
    if (index < 0 || index >= kActionCount) {
        throw std::invalid_argument("action index out of range: " + std::to_string(index));
    }
    return static_cast<CompressionAction>(index);
}

inline constexpr int action_index(CompressionAction a) { return static_cast<int>(a); }

}  // namespace pqos
