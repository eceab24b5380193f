// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "wsa/dsp/audio.hpp"
#include "wsa/model/model.hpp"

namespace wsa::analysis {

using model::AttentionRecord;

// Dense, head-averaged attention maps of every site for one forward pass on
// channel 0 of `audio`, in execution order. Throws ConfigError for a WSA-mode
// model (dense maps do not exist there).
std::vector<AttentionRecord> capture_attention(const model::SepModel& model, const dsp::AudioBuffer& audio);

// Fraction of a row-stochastic map's mass within |i - j| <= w/2:
// (sum over the band) / n. Throws DimensionError for a non-square map.
double locality_mass(const Tensor& map, std::size_t w);

// size x size block on the diagonal, starting at (n - size + 1) / 2 (for
// n = 801 and size 30: rows and columns 386..415). Throws DimensionError if
// the map is smaller than the crop or not square.
Tensor diagonal_crop(const Tensor& map, std::size_t size = 30);

struct LocalityStats {
  std::size_t window = 0;
  double in_band_mass = 0;         // mean of per_layer
  std::vector<double> per_layer;   // one entry per record of the chosen axis
};

// Locality of the records on `axis` for each window.
std::vector<LocalityStats> locality_stats(const std::vector<AttentionRecord>& records,
                                          const std::vector<std::size_t>& windows,
                                          model::Axis axis = model::Axis::time);

struct EvalPair {
  dsp::AudioBuffer mix;
  dsp::AudioBuffer target;
};

struct SweepRow {
  std::optional<std::size_t> window;  // nullopt: the unmodified full-attention model
  double sdr_db = 0;                  // median over eval pairs
  double flops_reduction = 1;         // window-only cost model at the model's T'
};

// Zero-shot window sweep: a baseline row for the model itself, then one row
// per window with time attention swapped for a sink-free window (S = 0).
// T' is taken from the first pair's length. The source model is not
// modified. Throws ConfigError for an empty eval set or a WSA-mode model.
std::vector<SweepRow> zero_shot_sweep(const model::SepModel& model, const std::vector<EvalPair>& pairs,
                                      const std::vector<std::size_t>& windows);

}  // namespace wsa::analysis
