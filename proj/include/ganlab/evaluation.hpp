#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ganlab/datasets.hpp"
#include "ganlab/network.hpp"
#include "ganlab/tensor.hpp"

namespace ganlab {

inline constexpr std::size_t kDefaultQueryCount = 200;

// Frozen, randomly initialized MLP (data_dim -> 128 -> feature_dim) standing
// in for a pretrained backbone. Deterministic given its seed.
class FeatureEmbedder {
public:
    FeatureEmbedder(std::size_t data_dim, std::uint64_t seed, std::size_t feature_dim = 64);

    Tensor<double> embed(const Tensor<double>& x) const;
    std::size_t data_dim() const { return data_dim_; }
    std::size_t feature_dim() const { return feature_dim_; }
    std::uint64_t seed() const { return seed_; }

private:
    std::size_t data_dim_;
    std::size_t feature_dim_;
    std::uint64_t seed_;
    NetworkSpec spec_;
    ParamStore<double> params_;
};

enum class SpaceKind { PixelL1, FeatureL2 };

struct DistanceSpace {
    SpaceKind kind = SpaceKind::PixelL1;
    Domain domain;
    const FeatureEmbedder* embedder = nullptr;  // required for FeatureL2

    static DistanceSpace pixel(Domain domain) { return {SpaceKind::PixelL1, domain, nullptr}; }
    static DistanceSpace feature(const FeatureEmbedder& e, Domain domain = {}) {
        return {SpaceKind::FeatureL2, domain, &e};
    }
    // "pixel_l1" or "feature(random,seed=<s>)".
    std::string label() const;
};

// Mean absolute difference after mapping [-1, 1] to [0, 255]; planar data
// is compared in raw coordinates.
double pixel_distance(std::span<const double> a, std::span<const double> b, const Domain& domain);
double feature_distance(std::span<const double> a, std::span<const double> b, const FeatureEmbedder& embedder);

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Exact brute-force 1-NN for each query row; ties go to the lowest corpus index.
std::vector<Neighbor> nn_search(const Tensor<double>& queries, const Tensor<double>& corpus,
                                const DistanceSpace& space);

struct WorstCaseStats {
    double avg = 0.0;
    double top10 = 0.0;  // mean of the ceil(10% * count) largest distances
    double top5 = 0.0;   // mean of the ceil(5% * count) largest distances
};

WorstCaseStats report_stats(std::span<const double> distances);

enum class Direction { Overfitting, ModeDrop };
const char* direction_name(Direction d);

struct MetricsReport {
    Direction direction = Direction::Overfitting;
    std::string space;
    double avg = 0.0;
    double top10 = 0.0;
    double top5 = 0.0;
    std::size_t query_count = 0;
    std::uint64_t seed_eval = 0;
};

// Maps a batch of latents (rows) to generated samples (rows).
using Generator = std::function<Tensor<double>(const Tensor<double>&)>;

// Sorted, seeded subsample of [0, population) without replacement; the
// identity when count == population.
std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t count, std::uint64_t seed);

// Precision direction: generated samples (from a subsample of Z) searched in all of X.
MetricsReport overfitting_metric(const Generator& generator, const LatentSet& latents, const SampleSet& data,
                                 const DistanceSpace& space, std::size_t query_count, std::uint64_t seed_eval);

// Recall direction: a subsample of X searched in G(Z) for all of Z.
MetricsReport mode_drop_metric(const Generator& generator, const LatentSet& latents, const SampleSet& data,
                               const DistanceSpace& space, std::size_t query_count, std::uint64_t seed_eval);

}  // namespace ganlab
