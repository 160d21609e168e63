#include "ganlab/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ganlab/checkpoint.hpp"
#include "ganlab/error.hpp"

namespace ganlab {

std::optional<int> TrainConfig::batch_exponent() const {
    if (m == 0 || n % m != 0) return std::nullopt;
    std::size_t ratio = n / m;
    int l = 0;
    while (ratio > 1) {
        if (ratio % 2 != 0) return std::nullopt;
        ratio /= 2;
        ++l;
    }
    return l;
}

std::string TrainConfig::validate() const {
    if (n < 1 || k < 1 || latent_dim < 1) throw ConfigError("n, k and latent_dim must be positive");
    if (m < 1 || m > n) throw ConfigError("mini-batch size m must satisfy 1 <= m <= n");
    if (m > k) throw ConfigError("mini-batch size m must not exceed k");
    if (m == n && k != n) throw ConfigError("the deterministic regime (m = n) requires k = n");
    if (k % m != 0) throw ConfigError("m must divide k for the without-replacement latent schedule");
    if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
    if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ConfigError("ema_decay must lie in [0, 1]");
    if (!(adam.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ConfigError("ADAM betas must lie in [0, 1)");
    if (!(adam.eps > 0.0)) throw ConfigError("ADAM epsilon must be positive");
    if (!(convergence_tol >= 0.0)) throw ConfigError("convergence_tol must be non-negative");
    if (eval_query_count < 1) throw ConfigError("eval_query_count must be positive");
    const auto r = regime();
    if (r.minibatch_enabled && r.latent_noise_enabled) {
        if (!force_mixed_regimes)
            throw ConfigError("mini-batch sampling and latent noise are both enabled; "
                              "set force_mixed_regimes to study them together");
        return "both stochasticity sources are enabled; their effects are not isolated";
    }
    return {};
}

namespace {

void check_probabilities(std::span<const double> p, const char* what) {
    if (p.empty()) throw std::invalid_argument(std::string(what) + ": no probabilities");
    for (double x : p)
        if (!(x > 0.0 && x < 1.0))
            throw std::domain_error(std::string(what) + ": probability " + std::to_string(x) + " outside (0, 1)");
}

double mean_log(std::span<const double> p, bool complement) {
    double s = 0.0;
    for (double x : p) s += std::log(complement ? 1.0 - x : x);
    return s / static_cast<double>(p.size());
}

}  // namespace

double d_loss(std::span<const double> p_real, std::span<const double> p_fake) {
    check_probabilities(p_real, "d_loss");
    check_probabilities(p_fake, "d_loss");
    return -(mean_log(p_real, false) + mean_log(p_fake, true));
}

double g_loss(std::span<const double> p_fake) {
    check_probabilities(p_fake, "g_loss");
    return -mean_log(p_fake, false);
}

std::vector<std::size_t> LatentSchedule::next(std::size_t m, Rng& rng) {
    if (m == 0 || m > k_) throw std::invalid_argument("latent batch size must satisfy 1 <= m <= k");
    std::vector<std::size_t> out(m);
    if (m == k_) {
        for (std::size_t i = 0; i < m; ++i) out[i] = i;
        return out;
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (cursor_ == order_.size()) {
            order_ = rng.permutation(k_);
            cursor_ = 0;
        }
        out[i] = order_[cursor_++];
    }
    return out;
}

std::vector<std::size_t> draw_data_indices(std::size_t n, std::size_t m, Rng& rng) {
    if (m == 0 || m > n) throw std::invalid_argument("data batch size must satisfy 1 <= m <= n");
    std::vector<std::size_t> out(m);
    if (m == n) {
        for (std::size_t i = 0; i < m; ++i) out[i] = i;
        return out;
    }
    for (auto& i : out) i = rng.below(n);
    return out;
}

template <typename T>
MiniBatch<T> sample_minibatch(const Tensor<T>& data, const Tensor<T>& latents, std::size_t m, Rng& rng,
                              LatentSchedule& schedule) {
    if (m > data.rows() || m > latents.rows())
        throw std::invalid_argument("mini-batch size " + std::to_string(m) + " exceeds n or k");
    MiniBatch<T> b;
    b.data_indices = draw_data_indices(data.rows(), m, rng);
    b.latent_indices = schedule.next(m, rng);
    b.x = data.gather_rows(b.data_indices);
    b.z = latents.gather_rows(b.latent_indices);
    return b;
}

template <typename T>
Tensor<T> perturb_latent(const Tensor<T>& z, double variance, Rng& rng) {
    if (!(variance >= 0.0)) throw std::invalid_argument("noise variance must be non-negative");
    if (variance == 0.0) return z;
    const double sd = std::sqrt(variance);
    Tensor<T> out = z;
    for (T& v : out.data()) v += static_cast<T>(sd * rng.normal());
    return out;
}

template <typename T>
GanTrainer<T>::GanTrainer(TrainConfig config, const SampleSet& data, const LatentSet& latents)
    : config_(std::move(config)), data_(&data), latents_(&latents) {
    if (const auto warning = config_.validate(); !warning.empty()) std::cerr << "warning: " << warning << "\n";
    if (data.size() != config_.n)
        throw ConfigError("config n = " + std::to_string(config_.n) + " but X holds " + std::to_string(data.size()));
    if (latents.size() != config_.k)
        throw ConfigError("config k = " + std::to_string(config_.k) + " but Z holds " +
                          std::to_string(latents.size()));
    if (latents.dim() != config_.latent_dim) throw ConfigError("latent_dim does not match Z");

    x_ = data.samples().template cast<T>();
    z_ = latents.latents().template cast<T>();
    const OutputHead head = data.domain().is_image() ? OutputHead::Tanh : OutputHead::Identity;
    g_spec_ = ganlab::generator_spec(config_.latent_dim, data.dim(), head, config_.g_hidden);
    d_spec_ = ganlab::discriminator_spec(data.dim(), config_.d_hidden);

    state_.generator = init_params<T>(g_spec_, Rng(config_.seed_train, Stream::GeneratorInit).next_u64());
    state_.discriminator = init_params<T>(d_spec_, Rng(config_.seed_train, Stream::DiscriminatorInit).next_u64());
    state_.adam_g = AdamState<T>(config_.adam);
    state_.adam_d = AdamState<T>(config_.adam);
    state_.ema = make_ema(state_.generator, config_.ema_decay);
    state_.schedule = LatentSchedule(config_.k);
    state_.sampling_rng = Rng(config_.seed_train, Stream::Sampling);
    state_.noise_rng = Rng(config_.seed_train, Stream::Noise);
    build_graphs();
}

template <typename T>
void GanTrainer<T>::build_graphs() {
    build_network(g_eval_, g_spec_, "g", g_eval_.input("z"), Trainable::No);

    // D update: minimize -(mean log D(x) + mean log(1 - D(G(z)))).
    const NodeId p_real = build_network(d_step_, d_spec_, "d", d_step_.input("x_real"), Trainable::Yes);
    const NodeId p_fake = build_network(d_step_, d_spec_, "d", d_step_.input("x_fake"), Trainable::Yes);
    const NodeId real_term = d_step_.mean(d_step_.log(p_real));
    const NodeId fake_term = d_step_.mean(d_step_.log(d_step_.affine(p_fake, T{-1}, T{1})));
    d_step_.affine(d_step_.add(real_term, fake_term), T{-1}, T{0});

    // G update, non-saturating: minimize -mean log D(G(z)) with D held fixed.
    const NodeId fake = build_network(g_step_, g_spec_, "g", g_step_.input("z"), Trainable::Yes);
    const NodeId p = build_network(g_step_, d_spec_, "d", fake, Trainable::No);
    g_step_.affine(g_step_.mean(g_step_.log(p)), T{-1}, T{0});
}

template <typename T>
Tensor<T> GanTrainer<T>::generate(const ParamStore<T>& params, const Tensor<T>& z) {
    Bindings<T> b;
    bind_network(b, params, "g");
    b["z"] = z;
    return g_eval_.forward(b);
}

namespace {

std::string head_of(const std::vector<std::size_t>& idx) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < idx.size() && i < 8; ++i) os << (i ? " " : "") << idx[i];
    if (idx.size() > 8) os << " ... (" << idx.size() << ")";
    os << ']';
    return os.str();
}

}  // namespace

template <typename T>
const LossRecord& GanTrainer<T>::step() {
    auto& s = state_;
    LossRecord rec;
    rec.iteration = s.iteration + 1;
    MiniBatch<T> batch;
    std::vector<std::size_t> g_latents;
    try {
        batch = sample_minibatch(x_, z_, config_.m, s.sampling_rng, s.schedule);
        const Tensor<T> z_d = perturb_latent(batch.z, config_.noise_variance, s.noise_rng);
        const Tensor<T> fake = generate(s.generator, z_d);

        for (T sigma : advance_spectral_state(s.discriminator, 1)) rec.sigmas.push_back(static_cast<double>(sigma));
        Bindings<T> bd;
        bind_network(bd, s.discriminator, "d");
        bd["x_real"] = batch.x;
        bd["x_fake"] = fake;
        rec.d_loss = static_cast<double>(d_step_.forward(bd).item());
        if (!std::isfinite(rec.d_loss)) throw NumericError("non-finite discriminator loss");
        adam_step(s.adam_d, s.discriminator, strip_prefix(d_step_.backward(), std::string("d")));
        ++s.d_updates;

        g_latents = s.schedule.next(config_.m, s.sampling_rng);
        const Tensor<T> z_g = perturb_latent(z_.gather_rows(g_latents), config_.noise_variance, s.noise_rng);
        advance_spectral_state(s.discriminator, 1);
        Bindings<T> bg;
        bind_network(bg, s.generator, "g");
        bind_network(bg, s.discriminator, "d");
        bg["z"] = z_g;
        rec.g_loss = static_cast<double>(g_step_.forward(bg).item());
        if (!std::isfinite(rec.g_loss)) throw NumericError("non-finite generator loss");
        adam_step(s.adam_g, s.generator, strip_prefix(g_step_.backward(), std::string("g")));
        ++s.g_updates;

        ema_update(s.ema, s.generator);
    } catch (const NumericError& e) {
        std::ostringstream os;
        os << "training aborted at iteration " << rec.iteration << ": " << e.what() << "\n"
           << "  m=" << config_.m << " noise_variance=" << config_.noise_variance << "\n"
           << "  data indices " << head_of(batch.data_indices) << "\n"
           << "  D latent indices " << head_of(batch.latent_indices) << "\n"
           << "  G latent indices " << head_of(g_latents) << "\n"
           << "  d_loss=" << rec.d_loss << " g_loss=" << rec.g_loss << "\n"
           << "  generator finite=" << s.generator.all_finite()
           << " discriminator finite=" << s.discriminator.all_finite();
        if (!s.history.empty())
            os << "\n  previous losses d=" << s.history.back().d_loss << " g=" << s.history.back().g_loss;
        throw NumericError(os.str());
    }
    s.iteration = rec.iteration;
    s.history.push_back(std::move(rec));
    return s.history.back();
}

template <typename T>
Generator GanTrainer<T>::ema_generator() const {
    return [params = state_.ema.shadow, spec = g_spec_](const Tensor<double>& z) {
        return generator_forward(params, spec, z.template cast<T>()).template cast<double>();
    };
}

template <typename T>
double GanTrainer<T>::mode_drop_pixel_avg() const {
    const std::size_t q = std::min(config_.eval_query_count, data_->size());
    return mode_drop_metric(ema_generator(), *latents_, *data_, DistanceSpace::pixel(data_->domain()), q,
                            config_.seed_eval)
        .avg;
}

template <typename T>
TrainResult<T> GanTrainer<T>::run(const Observer& observer) {
    TrainResult<T> result;
    const bool rule = config_.convergence_window > 0 && config_.convergence_tol > 0.0;
    std::optional<double> previous;
    int calm_windows = 0;
    while (state_.iteration < config_.max_iters) {
        step();
        if (observer) observer(*this);
        if (!rule || state_.iteration % config_.convergence_window != 0) continue;
        const double metric = mode_drop_pixel_avg();
        result.metric_trace.push_back({state_.iteration, metric});
        if (previous) {
            const double rel = std::abs(metric - *previous) / std::max(std::abs(*previous), 1e-12);
            calm_windows = rel < config_.convergence_tol ? calm_windows + 1 : 0;
        }
        previous = metric;
        if (calm_windows >= 2) {
            result.converged = true;
            break;
        }
    }
    result.ema_generator = state_.ema.shadow;
    result.history = state_.history;
    result.iterations = state_.iteration;
    return result;
}

template <typename T>
void GanTrainer<T>::save_checkpoint(const std::filesystem::path& path) const {
    Checkpoint ckpt;
    ckpt.put_scalar("iteration", static_cast<double>(state_.iteration));
    ckpt.put_scalar("ema.decay", state_.ema.decay);
    store_params(ckpt, "generator", state_.generator);
    store_params(ckpt, "discriminator", state_.discriminator);
    store_params(ckpt, "ema", state_.ema.shadow);
    store_adam(ckpt, "adam_g", state_.adam_g);
    store_adam(ckpt, "adam_d", state_.adam_d);
    ckpt.save(path);
}

template <typename T>
TrainResult<T> train(const TrainConfig& config, const SampleSet& data, const LatentSet& latents) {
    GanTrainer<T> trainer(config, data, latents);
    return trainer.run();
}

void write_loss_history(const std::filesystem::path& path, std::span<const LossRecord> history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write loss history " + path.string());
    out << "# format_version: 1\niteration,d_loss,g_loss";
    const std::size_t layers = history.empty() ? 0 : history.front().sigmas.size();
    for (std::size_t i = 0; i < layers; ++i) out << ",sigma_" << layer_id(i);
    out << "\n";
    char buf[40];
    for (const auto& r : history) {
        out << r.iteration;
        std::snprintf(buf, sizeof buf, ",%.17g", r.d_loss);
        out << buf;
        std::snprintf(buf, sizeof buf, ",%.17g", r.g_loss);
        out << buf;
        for (double s : r.sigmas) {
            std::snprintf(buf, sizeof buf, ",%.17g", s);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing loss history " + path.string());
}

template class GanTrainer<float>;
template class GanTrainer<double>;

#define GANLAB_INSTANTIATE(T)                                                                                   \
    template MiniBatch<T> sample_minibatch<T>(const Tensor<T>&, const Tensor<T>&, std::size_t, Rng&,           \
                                              LatentSchedule&);                                                 \
    template Tensor<T> perturb_latent<T>(const Tensor<T>&, double, Rng&);                                       \
    template TrainResult<T> train<T>(const TrainConfig&, const SampleSet&, const LatentSet&);

GANLAB_INSTANTIATE(float)
GANLAB_INSTANTIATE(double)
#undef GANLAB_INSTANTIATE

}  // namespace ganlab
