// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "wsa/attention/attention.hpp"

namespace wsa::attention {

enum class AttentionMode { full, wsa, window_only };

std::string to_string(AttentionMode mode);

// Attention-score evaluations per (batch, head, layer) under the cost model
// full = N^2, wsa = N (W + S), window-only = N W. Counts are clamped to
// [N, N^2]: a window covering the sequence costs no more than full attention,
// and every token scores at least itself.
struct FlopsReport {
  AttentionMode mode = AttentionMode::full;
  std::uint64_t seq = 0;
  std::uint64_t score_count = 0;
  double reduction_vs_full = 1.0;
};

FlopsReport attention_flops(std::uint64_t seq, AttentionMode mode, const WsaConfig& cfg = {});

}  // namespace wsa::attention
