#include "lgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lgnn/error.hpp"

namespace lgnn {

std::string_view to_string(Region r) noexcept {
    switch (r) {
        case Region::periventricular: return "periventricular";
        case Region::subcortical: return "subcortical";
        case Region::juxtacortical: return "juxtacortical";
        case Region::infratentorial: return "infratentorial";
    }
    return "unknown";
}

std::optional<Region> region_from_string(std::string_view name) noexcept {
    for (const Region r : kAllRegions)
        if (to_string(r) == name) return r;
    return std::nullopt;
}

void GraphConfig::validate() const {
    if (k < 1) throw ParameterError("graph k must be >= 1");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("graph tau must be positive and finite");
    if (!(distance_floor >= 0.0 && distance_floor <= 1.0)) {
        throw ParameterError("graph distance_floor must lie in [0,1]");
    }
}

Tensor LesionGraph::features() const {
    const std::size_t d = feature_dim();
    Tensor out(num_nodes(), d);
    for (std::size_t i = 0; i < lesions.size(); ++i) {
        if (lesions[i].features.size() != d) {
            throw ShapeError("lesion " + std::to_string(i) + " of patient " + patient_id +
                             " has inconsistent feature dimension");
        }
        std::copy(lesions[i].features.begin(), lesions[i].features.end(), out.row(i).begin());
    }
    return out;
}

namespace {

double squared_distance(const Position& a, const Position& b) noexcept {
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return s;
}

}  // namespace

double edge_weight(const Position& si, const Position& sj, double tau, double floor) {
    const double w = std::exp(-squared_distance(si, sj) / (tau * tau));
    return std::max({w, floor, std::numeric_limits<double>::min()});
}

std::vector<Edge> build_knn_edges(std::span<const Lesion> lesions, const GraphConfig& cfg) {
    cfg.validate();
    const std::size_t n = lesions.size();
    if (n == 0) throw InputError("cannot build a graph from an empty lesion list");

    // adjacency[i*n + j] marks j as one of i's k nearest (or vice versa).
    std::vector<char> linked(n * n, 0);
    std::vector<std::size_t> order(n);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) dist[j] = squared_distance(lesions[i].position, lesions[j].position);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::erase(order, i);
        const std::size_t take = std::min(cfg.k, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                          });
        for (std::size_t t = 0; t < take; ++t) {
            const std::size_t j = order[t];
            linked[i * n + j] = 1;
            linked[j * n + i] = 1;
        }
        order.resize(n);
    }

    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (linked[i * n + j]) {
                edges.push_back({i, j, edge_weight(lesions[i].position, lesions[j].position, cfg.tau,
                                                   cfg.distance_floor)});
            }
        }
    }
    return edges;
}

void flush_negligible(Tensor& t) noexcept {
    for (double& v : t.data())
        if (std::abs(v) < kNegligibleWeight) v = 0.0;
}

Tensor weighted_adjacency(const LesionGraph& graph) {
    const std::size_t n = graph.num_nodes();
    Tensor a(n, n);
    for (const Edge& e : graph.edges) {
        a(e.i, e.j) = e.weight;
        a(e.j, e.i) = e.weight;
    }
    return a;
}

Tensor normalized_adjacency(const LesionGraph& graph) {
    const std::size_t n = graph.num_nodes();
    Tensor a = weighted_adjacency(graph);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
    flush_negligible(a);
    return a;
}

LesionGraph build_graph(std::string patient_id, std::vector<Lesion> lesions, int label,
                        const GraphConfig& cfg) {
    LesionGraph g;
    g.patient_id = std::move(patient_id);
    g.edges = build_knn_edges(lesions, cfg);
    g.lesions = std::move(lesions);
    g.label = label;
    return g;
}

}  // namespace lgnn
