#ifndef AKGNN_SYNTHETIC_HPP
#define AKGNN_SYNTHETIC_HPP

#include "akgnn/dataset.hpp"

#include <cstdint>
#include <random>

namespace akgnn {

/// Parameters of a contextual stochastic block model with bag-of-words features.
struct SyntheticSpec {
    Index nodes{600};
    int classes{4};
    Index features{200};
    double avg_degree{4.0};
    double homophily{0.8};      ///< probability an edge stays inside the class
    Index words_per_node{12};
    double feature_signal{0.5}; ///< probability a word is drawn from the class vocabulary
    Index train_per_class{20};
    Index val_size{100};
    Index test_size{200};
    bool normalize_features{true};
    std::uint64_t seed{0};
};

/// Deterministic in (spec, seed). The graph has no isolated nodes; the split
/// takes train_per_class nodes of every class, then val_size and test_size
/// nodes from the remainder in shuffled order. Features are word counts,
/// row-normalized unless disabled.
LoadedDataset generate_synthetic(const SyntheticSpec& spec);

/// Random connected graph on n >= 2 nodes: a shuffled spanning path plus
/// `extra_edges` uniformly drawn extra edges.
CsrGraph random_connected_graph(Index n, Index extra_edges, std::mt19937_64& rng);

} // namespace akgnn

#endif // AKGNN_SYNTHETIC_HPP
