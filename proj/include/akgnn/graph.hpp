#ifndef AKGNN_GRAPH_HPP
#define AKGNN_GRAPH_HPP

#include "akgnn/types.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace akgnn {

using Edge = std::pair<Index, Index>;

/**
 * Immutable undirected graph in compressed sparse row form.
 *
 * Every undirected edge is stored in both directions, neighbor lists are
 * strictly increasing and there are no self-loops. Self-interaction enters
 * only through the adaptive kernel's identity term.
 */
class CsrGraph {
public:
    CsrGraph() = default;

    Index num_nodes() const noexcept { return static_cast<Index>(degrees_.size()); }
    /// Number of stored (directed) entries, i.e. twice the undirected edge count.
    Index num_entries() const noexcept { return static_cast<Index>(col_indices_.size()); }
    Index num_edges() const noexcept { return num_entries() / 2; }

    std::span<const Index> row_offsets() const noexcept { return row_offsets_; }
    std::span<const Index> col_indices() const noexcept { return col_indices_; }
    std::span<const Index> degrees() const noexcept { return degrees_; }

    std::span<const Index> neighbors(Index node) const noexcept
    {
        return std::span<const Index>(col_indices_).subspan(
            static_cast<std::size_t>(row_offsets_[node]),
            static_cast<std::size_t>(degrees_[node]));
    }

    Index degree(Index node) const noexcept { return degrees_[node]; }

    bool has_isolated_nodes() const noexcept;
    /// Undirected edges with i < j, in row order.
    std::vector<Edge> edge_list() const;

    friend CsrGraph build_graph(Index num_nodes, std::span<const Edge> edges);

private:
    std::vector<Index> row_offsets_{0};
    std::vector<Index> col_indices_;
    std::vector<Index> degrees_;
};

/// Symmetrize, deduplicate and sort an edge list. Throws DataError on
/// out-of-range endpoints or self-loops.
CsrGraph build_graph(Index num_nodes, std::span<const Edge> edges);

/// Throws DataError naming the first isolated node, if any.
void require_no_isolated_nodes(const CsrGraph& graph);

/// Relabel nodes: node i of the input becomes node perm[i] of the output.
CsrGraph permute_graph(const CsrGraph& graph, std::span<const Index> perm);

} // namespace akgnn

#endif // AKGNN_GRAPH_HPP
