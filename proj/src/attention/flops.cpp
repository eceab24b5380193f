// SPDX-License-Identifier: Apache-2.0

#include "wsa/attention/flops.hpp"

#include <algorithm>

#include "wsa/core/error.hpp"

namespace wsa::attention {

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::full:
      return "full";
    case AttentionMode::wsa:
      return "wsa";
    case AttentionMode::window_only:
      return "window-only";
  }
  return "unknown";
}

FlopsReport attention_flops(std::uint64_t seq, AttentionMode mode, const WsaConfig& cfg) {
  if (seq == 0) throw ConfigError("attention_flops needs seq >= 1");
  const std::uint64_t full = seq * seq;
  std::uint64_t count = full;
  if (mode == AttentionMode::wsa) count = seq * (cfg.window + cfg.sinks);
  if (mode == AttentionMode::window_only) count = seq * cfg.window;
  count = std::clamp(count, seq, full);
  return FlopsReport{mode, seq, count, static_cast<double>(full) / static_cast<double>(count)};
}

}  // namespace wsa::attention
