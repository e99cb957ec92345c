#pragma once

#include "gae/retina.hpp"
#include "gae/rng.hpp"
#include "gae/tensor.hpp"

namespace gae {

enum class PolicyKind { AttentionArgmax, Random, NoSAExtraChannel, NoSAC };

// NoSA / NoSAC select randomly; only AttentionArgmax consults the heatmap.
bool policy_selects_randomly(PolicyKind kind);

// Argmax of the heatmap over unvisited cells (row-major tie-break), or a
// uniform unvisited cell for random policies. Selection happens outside the
// gradient graph. Throws when every cell is visited.
GlimpseAnchor select_next(const Tensor& heatmap, const VisitedMask& visited, PolicyKind kind, Rng& rng);

// Uniform over all grid cells from the episode's seeded generator.
GlimpseAnchor first_glimpse(Rng& rng, std::int64_t grid_rows, std::int64_t grid_cols);

} // namespace gae
