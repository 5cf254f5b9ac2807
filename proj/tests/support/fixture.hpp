#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "htgnn/htg.hpp"
#include "htgnn/model.hpp"
#include "htgnn/params.hpp"
#include "reference.hpp"

namespace htgnn::fixture {

/// One node type, three nodes, two relation types, two slices. Node 2 is
/// absent from the second slice.
HeterogeneousTemporalGraph golden_graph();
/// d = 4, two heads, two layers, window 2, link task.
ModelConfig golden_config();
/// Every parameter (gate logits and biases included) drawn uniformly from
/// [-0.8, 0.8] so that no term of the forward pass is trivially zero.
void fill_uniform(HTGNNParams& params, std::uint64_t seed, double range = 0.8);
/// Pairs scored by the golden readout.
std::vector<Edge> golden_pairs();
std::vector<double> golden_labels();

/// Random HTG with `types` node types, every ordered type pair related,
/// `slices` slices and roughly `density` edge probability.
HeterogeneousTemporalGraph random_graph(std::mt19937_64& rng, std::size_t types,
                                        std::size_t nodes_per_type, std::size_t slices,
                                        double density, std::size_t feature_dim);

/// The whole graph as one window (positions 0..T-1).
WindowView whole(const HeterogeneousTemporalGraph& g);

/// Re-keys a batched attention trace the way the scalar reference keys its
/// trace, so the two can be compared entry by entry.
reference::Trace keyed_trace(const AttentionTrace& trace, const CompiledWindow& window,
                             Serialization serialization);

/// Directory holding the frozen fixtures (tests/data).
std::filesystem::path data_dir();

}  // namespace htgnn::fixture
