#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgnn/tensor.hpp"

namespace lgnn {

enum class Region { periventricular, subcortical, juxtacortical, infratentorial };

inline constexpr std::array<Region, 4> kAllRegions = {
    Region::periventricular, Region::subcortical, Region::juxtacortical, Region::infratentorial};

std::string_view to_string(Region r) noexcept;
std::optional<Region> region_from_string(std::string_view name) noexcept;

using Position = std::array<double, 3>;

struct Lesion {
    Position position{};          // normalized coordinates in [0,1]^3
    std::vector<double> features;
    Region region = Region::periventricular;

    friend bool operator==(const Lesion&, const Lesion&) = default;
};

/// Undirected edge stored once with i < j.
struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct GraphConfig {
    std::size_t k = 5;
    double tau = 0.01;
    /// Lower clamp applied to edge weights.
    double distance_floor = 0.0;

    void validate() const;
};

struct LesionGraph {
    std::string patient_id;
    std::vector<Lesion> lesions;
    std::vector<Edge> edges;
    int label = 0;

    std::size_t num_nodes() const noexcept { return lesions.size(); }
    std::size_t feature_dim() const noexcept { return lesions.empty() ? 0 : lesions.front().features.size(); }
    /// Node feature matrix, one row per lesion.
    Tensor features() const;
};

/// Symmetric ("or") kNN over lesion positions. Distance ties resolve toward
/// the smaller node index.
std::vector<Edge> build_knn_edges(std::span<const Lesion> lesions, const GraphConfig& cfg);

/// exp(-|si - sj|^2 / tau^2), clamped below by `floor` and by the smallest
/// positive normal double so that stored weights stay in (0, 1].
double edge_weight(const Position& si, const Position& sj, double tau, double floor = 0.0);

/// D^-1/2 (A_w + I) D^-1/2 with D the degree matrix of A_w + I.
Tensor normalized_adjacency(const LesionGraph& graph);

/// Propagation entries below this magnitude are stored as exact zeros.
/// With tau = 0.01 most kNN weights sit at the bottom of the double range,
/// and multiplying by them yields subnormals, which take the slow
/// floating-point path on every multiply.
inline constexpr double kNegligibleWeight = 1e-200;

void flush_negligible(Tensor& t) noexcept;

/// Dense weighted adjacency (no self loops).
Tensor weighted_adjacency(const LesionGraph& graph);

LesionGraph build_graph(std::string patient_id, std::vector<Lesion> lesions, int label,
                        const GraphConfig& cfg);

}  // namespace lgnn
