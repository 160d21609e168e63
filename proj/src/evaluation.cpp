#include "ganlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ganlab/error.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

FeatureEmbedder::FeatureEmbedder(std::size_t data_dim, std::uint64_t seed, std::size_t feature_dim)
    : data_dim_(data_dim), feature_dim_(feature_dim), seed_(seed) {
    spec_.role = NetworkRole::Generator;
    spec_.layers = {LayerSpec::dense(data_dim, 128), LayerSpec::activation(LayerKind::LeakyRelu),
                    LayerSpec::dense(128, feature_dim)};
    params_ = init_params<double>(spec_, Rng(seed, Stream::Embedder).next_u64());
}

Tensor<double> FeatureEmbedder::embed(const Tensor<double>& x) const {
    if (x.rank() != 2 || x.cols() != data_dim_)
        throw ShapeError("embedder expects (batch, " + std::to_string(data_dim_) + "), got " + shape_str(x.shape()));
    return generator_forward(params_, spec_, x);
}

std::string DistanceSpace::label() const {
    if (kind == SpaceKind::PixelL1) return "pixel_l1";
    if (!embedder) throw std::invalid_argument("feature space without an embedder");
    return "feature(random,seed=" + std::to_string(embedder->seed()) + ")";
}

double pixel_distance(std::span<const double> a, std::span<const double> b, const Domain& domain) {
    if (a.size() != b.size() || a.empty()) throw ShapeError("pixel_distance: shape mismatch");
    double total = 0.0;
    if (domain.is_image()) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double pa = (a[i] + 1.0) * 127.5;
            const double pb = (b[i] + 1.0) * 127.5;
            total += std::abs(pa - pb);
        }
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    }
    return total / static_cast<double>(a.size());
}

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

Tensor<double> as_row(std::span<const double> x) {
    return Tensor<double>({1, x.size()}, std::vector<double>(x.begin(), x.end()));
}

}  // namespace

double feature_distance(std::span<const double> a, std::span<const double> b, const FeatureEmbedder& embedder) {
    if (a.size() != b.size()) throw ShapeError("feature_distance: shape mismatch");
    const auto fa = embedder.embed(as_row(a));
    const auto fb = embedder.embed(as_row(b));
    return euclidean(fa.data(), fb.data());
}

std::vector<Neighbor> nn_search(const Tensor<double>& queries, const Tensor<double>& corpus,
                                const DistanceSpace& space) {
    if (corpus.empty() || corpus.rank() != 2) throw std::invalid_argument("nn_search: empty corpus");
    if (queries.rank() != 2 || queries.cols() != corpus.cols())
        throw ShapeError("nn_search: query dim does not match corpus dim");

    std::function<double(std::span<const double>, std::span<const double>)> dist;
    const Tensor<double>* q = &queries;
    const Tensor<double>* c = &corpus;
    Tensor<double> q_feat, c_feat;
    if (space.kind == SpaceKind::PixelL1) {
        const Domain domain = space.domain;
        dist = [domain](auto a, auto b) { return pixel_distance(a, b, domain); };
    } else {
        if (!space.embedder) throw std::invalid_argument("feature space without an embedder");
        q_feat = space.embedder->embed(queries);
        c_feat = space.embedder->embed(corpus);
        q = &q_feat;
        c = &c_feat;
        dist = euclidean;
    }

    std::vector<Neighbor> out(q->rows());
    for (std::size_t i = 0; i < q->rows(); ++i) {
        Neighbor best{0, dist(q->row(i), c->row(0))};
        for (std::size_t j = 1; j < c->rows(); ++j) {
            const double d = dist(q->row(i), c->row(j));
            if (d < best.distance) best = {j, d};
        }
        out[i] = best;
    }
    return out;
}

WorstCaseStats report_stats(std::span<const double> distances) {
    if (distances.empty()) throw std::invalid_argument("report_stats: no distances");
    std::vector<double> sorted(distances.begin(), distances.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>{});
    const std::size_t n = sorted.size();
    auto mean_of_top = [&](std::size_t count) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += sorted[i];
        return s / static_cast<double>(count);
    };
    // ceil(p% * n) in integer arithmetic
    const std::size_t n10 = (n * 10 + 99) / 100;
    const std::size_t n5 = (n * 5 + 99) / 100;
    double total = 0.0;
    for (double d : distances) total += d;
    return {total / static_cast<double>(n), mean_of_top(n10), mean_of_top(n5)};
}

const char* direction_name(Direction d) { return d == Direction::Overfitting ? "overfitting" : "mode_drop"; }

std::vector<std::size_t> subsample_indices(std::size_t population, std::size_t count, std::uint64_t seed) {
    if (count > population) throw std::invalid_argument("subsample larger than population");
    if (count == 0) throw std::invalid_argument("subsample of size zero");
    std::vector<std::size_t> idx;
    if (count == population) {
        idx.resize(population);
        for (std::size_t i = 0; i < population; ++i) idx[i] = i;
        return idx;
    }
    Rng rng(seed, Stream::Evaluation);
    auto perm = rng.permutation(population);
    idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

MetricsReport make_report(Direction dir, const DistanceSpace& space, const std::vector<Neighbor>& nn,
                          std::uint64_t seed_eval) {
    std::vector<double> d(nn.size());
    for (std::size_t i = 0; i < nn.size(); ++i) d[i] = nn[i].distance;
    const auto s = report_stats(d);
    return {dir, space.label(), s.avg, s.top10, s.top5, nn.size(), seed_eval};
}

}  // namespace

MetricsReport overfitting_metric(const Generator& generator, const LatentSet& latents, const SampleSet& data,
                                 const DistanceSpace& space, std::size_t query_count, std::uint64_t seed_eval) {
    if (query_count > latents.size())
        throw std::invalid_argument("overfitting_metric: query_count " + std::to_string(query_count) + " > k " +
                                    std::to_string(latents.size()));
    const auto idx = subsample_indices(latents.size(), query_count, seed_eval);
    const Tensor<double> generated = generator(latents.latents().gather_rows(idx));
    return make_report(Direction::Overfitting, space, nn_search(generated, data.samples(), space), seed_eval);
}

MetricsReport mode_drop_metric(const Generator& generator, const LatentSet& latents, const SampleSet& data,
                               const DistanceSpace& space, std::size_t query_count, std::uint64_t seed_eval) {
    if (query_count > data.size())
        throw std::invalid_argument("mode_drop_metric: query_count " + std::to_string(query_count) + " > n " +
                                    std::to_string(data.size()));
    const auto idx = subsample_indices(data.size(), query_count, seed_eval);
    const Tensor<double> generated = generator(latents.latents());
    return make_report(Direction::ModeDrop, space, nn_search(data.samples().gather_rows(idx), generated, space),
                       seed_eval);
}

}  // namespace ganlab
