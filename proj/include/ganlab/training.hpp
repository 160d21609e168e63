#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"
#include "ganlab/datasets.hpp"
#include "ganlab/evaluation.hpp"
#include "ganlab/network.hpp"
#include "ganlab/optimizer.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

struct StochasticityRegime {
    bool minibatch_enabled = false;     // m < n
    bool latent_noise_enabled = false;  // noise_variance > 0
};

struct TrainConfig {
    std::size_t n = 512;           // |X|
    std::size_t k = 512;           // |Z|
    std::size_t m = 512;           // mini-batch size
    std::size_t latent_dim = 16;
    double noise_variance = 0.0;   // sigma^2 of the training-time latent perturbation
    AdamConfig adam{};
    double ema_decay = 0.999;
    std::size_t max_iters = 20000;
    // Stop rule: every `convergence_window` iterations the EMA generator's
    // mode-drop pixel Avg is measured; training stops once its relative change
    // stays below `convergence_tol` for two consecutive windows. A zero window
    // or tolerance disables the rule.
    std::size_t convergence_window = 500;
    double convergence_tol = 0.02;
    std::size_t eval_query_count = kDefaultQueryCount;
    std::uint64_t seed_data = 1;
    std::uint64_t seed_latent = 2;
    std::uint64_t seed_train = 3;
    std::uint64_t seed_eval = 4;
    bool force_mixed_regimes = false;
    std::vector<std::size_t> g_hidden{128, 256};
    std::vector<std::size_t> d_hidden{256, 128};

    StochasticityRegime regime() const { return {m < n, noise_variance > 0.0}; }
    // l with m = n / 2^l when that holds exactly, otherwise nullopt.
    std::optional<int> batch_exponent() const;
    // Throws ConfigError on invalid settings. Returns a warning (empty when
    // none), e.g. for forced simultaneous stochasticity sources.
    std::string validate() const;
};

// Probability-space losses. Inputs must lie strictly inside (0, 1).
// d_loss = -(mean log p_real + mean log(1 - p_fake))
double d_loss(std::span<const double> p_real, std::span<const double> p_fake);
// Non-saturating generator loss: -mean log p_fake.
double g_loss(std::span<const double> p_fake);

// Epoch-wise permutation of latent indices consumed without replacement.
class LatentSchedule {
public:
    explicit LatentSchedule(std::size_t k = 0) : k_(k) {}

    // When m == k the full set is returned in index order and no randomness
    // is consumed.
    std::vector<std::size_t> next(std::size_t m, Rng& rng);
    std::size_t cursor() const { return cursor_; }

private:
    std::size_t k_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// Data indices: the full set in order when m == n, otherwise i.i.d. uniform
// with replacement.
std::vector<std::size_t> draw_data_indices(std::size_t n, std::size_t m, Rng& rng);

template <typename T>
struct MiniBatch {
    Tensor<T> x;
    Tensor<T> z;
    std::vector<std::size_t> data_indices;
    std::vector<std::size_t> latent_indices;
};

template <typename T>
MiniBatch<T> sample_minibatch(const Tensor<T>& data, const Tensor<T>& latents, std::size_t m, Rng& rng,
                              LatentSchedule& schedule);

// z + eps, eps ~ N(0, variance I), fresh per call. Identity (and no RNG
// consumption) when variance == 0.
template <typename T>
Tensor<T> perturb_latent(const Tensor<T>& z, double variance, Rng& rng);

struct LossRecord {
    std::uint64_t iteration = 0;  // 1-based iteration that produced the record
    double d_loss = 0.0;
    double g_loss = 0.0;
    std::vector<double> sigmas;   // per spectral layer, from the D update
};

struct MetricPoint {
    std::uint64_t iteration = 0;
    double mode_drop_pixel_avg = 0.0;
};

template <typename T>
struct TrainState {
    std::uint64_t iteration = 0;
    std::uint64_t d_updates = 0;
    std::uint64_t g_updates = 0;
    ParamStore<T> generator;
    ParamStore<T> discriminator;
    AdamState<T> adam_g;
    AdamState<T> adam_d;
    EmaState<T> ema;
    LatentSchedule schedule;
    Rng sampling_rng{0};
    Rng noise_rng{0};
    std::vector<LossRecord> history;
};

template <typename T>
struct TrainResult {
    ParamStore<T> ema_generator;
    std::vector<LossRecord> history;
    std::vector<MetricPoint> metric_trace;
    std::uint64_t iterations = 0;
    bool converged = false;  // stopped by the stop rule rather than max_iters
};

// Owns one training run: state, the three compiled graphs and references to
// the immutable X and Z.
template <typename T>
class GanTrainer {
public:
    using Observer = std::function<void(const GanTrainer&)>;

    GanTrainer(TrainConfig config, const SampleSet& data, const LatentSet& latents);

    // One D update followed by one G update against the updated D, then EMA.
    const LossRecord& step();
    // Steps until max_iters or the stop rule; `observer` runs after every step.
    TrainResult<T> run(const Observer& observer = {});

    const TrainConfig& config() const { return config_; }
    const TrainState<T>& state() const { return state_; }
    TrainState<T>& mutable_state() { return state_; }
    const NetworkSpec& generator_spec() const { return g_spec_; }
    const NetworkSpec& discriminator_spec() const { return d_spec_; }

    // EMA generator as an evaluation callable (unperturbed latents).
    Generator ema_generator() const;
    double mode_drop_pixel_avg() const;

    void save_checkpoint(const std::filesystem::path& path) const;

private:
    void build_graphs();
    Tensor<T> generate(const ParamStore<T>& params, const Tensor<T>& z);

    TrainConfig config_;
    const SampleSet* data_;
    const LatentSet* latents_;
    Tensor<T> x_;
    Tensor<T> z_;
    NetworkSpec g_spec_;
    NetworkSpec d_spec_;
    TrainState<T> state_;
    Graph<T> g_eval_;
    Graph<T> d_step_;
    Graph<T> g_step_;
};

template <typename T>
TrainResult<T> train(const TrainConfig& config, const SampleSet& data, const LatentSet& latents);

// Loss history CSV: "# format_version: 1", then
// iteration,d_loss,g_loss,sigma_dense0,... with 17 significant digits.
void write_loss_history(const std::filesystem::path& path, std::span<const LossRecord> history);

extern template class GanTrainer<float>;
extern template class GanTrainer<double>;

}  // namespace ganlab
