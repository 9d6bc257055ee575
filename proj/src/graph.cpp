#include "akgnn/graph.hpp"

#include <algorithm>
#include <string>

namespace akgnn {

bool CsrGraph::has_isolated_nodes() const noexcept
{
    return std::any_of(degrees_.begin(), degrees_.end(), [](Index d) { return d == 0; });
}

std::vector<Edge> CsrGraph::edge_list() const
{
    std::vector<Edge> out;
    out.reserve(static_cast<std::size_t>(num_edges()));
    for (Index i = 0; i < num_nodes(); ++i) {
        for (Index j : neighbors(i)) {
            if (i < j)
                out.emplace_back(i, j);
        }
    }
    return out;
}

CsrGraph build_graph(Index num_nodes, std::span<const Edge> edges)
{
    if (num_nodes < 0)
        throw DataError("build_graph: negative node count " + std::to_string(num_nodes));

    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (const auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes) {
            throw DataError("build_graph: edge (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for " + std::to_string(num_nodes) + " nodes");
        }
        if (i == j)
            throw DataError("build_graph: self-loop at node " + std::to_string(i));
        directed.emplace_back(i, j);
        directed.emplace_back(j, i);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    CsrGraph g;
    const auto n = static_cast<std::size_t>(num_nodes);
    g.degrees_.assign(n, 0);
    g.row_offsets_.assign(n + 1, 0);
    g.col_indices_.reserve(directed.size());
    for (const auto& [i, j] : directed) {
        ++g.degrees_[static_cast<std::size_t>(i)];
        g.col_indices_.push_back(j);
    }
    for (std::size_t i = 0; i < n; ++i)
        g.row_offsets_[i + 1] = g.row_offsets_[i] + g.degrees_[i];
    return g;
}

void require_no_isolated_nodes(const CsrGraph& graph)
{
    for (Index i = 0; i < graph.num_nodes(); ++i) {
        if (graph.degree(i) == 0)
            throw DataError("graph has isolated node " + std::to_string(i) +
                            " (degree 0); the renormalized kernel is undefined there");
    }
}

CsrGraph permute_graph(const CsrGraph& graph, std::span<const Index> perm)
{
    if (static_cast<Index>(perm.size()) != graph.num_nodes())
        throw DimensionError("permute_graph: permutation length " + std::to_string(perm.size()) +
                             " != node count " + std::to_string(graph.num_nodes()));
    std::vector<Edge> edges = graph.edge_list();
    for (auto& [i, j] : edges) {
        i = perm[static_cast<std::size_t>(i)];
        j = perm[static_cast<std::size_t>(j)];
    }
    return build_graph(graph.num_nodes(), edges);
}

} // namespace akgnn
