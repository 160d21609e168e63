#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"
#include "ganlab/tensor.hpp"

namespace ganlab {

// Probability clamp applied after the discriminator's sigmoid so that the
// log-losses downstream are always finite.
inline constexpr double kProbabilityEpsilon = 1e-7;

// Guard used in every norm computation of the power iteration.
inline constexpr double kNormEpsilon = 1e-12;

enum class LayerKind { Dense, LeakyRelu, Tanh, Sigmoid };

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    bool spectral_norm = false;

    static LayerSpec dense(std::size_t in, std::size_t out, bool sn = false) { return {LayerKind::Dense, in, out, sn}; }
    static LayerSpec activation(LayerKind kind) { return {kind, 0, 0, false}; }
};

enum class NetworkRole { Generator, Discriminator };

// Generator head: tanh for image data in [-1, 1], identity for planar data.
enum class OutputHead { Tanh, Identity };

struct NetworkSpec {
    NetworkRole role = NetworkRole::Generator;
    std::vector<LayerSpec> layers;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t dense_count() const;
    // Throws ConfigError when dims do not chain, spectral norm sits on a
    // non-dense layer, or the head does not fit the role.
    void validate() const;
};

NetworkSpec generator_spec(std::size_t latent_dim, std::size_t data_dim, OutputHead head,
                           const std::vector<std::size_t>& hidden = {128, 256});
NetworkSpec discriminator_spec(std::size_t data_dim, const std::vector<std::size_t>& hidden = {256, 128},
                               bool spectral_norm = true);

// Power-iteration state of one spectrally normalized layer.
template <typename T>
struct SpectralState {
    Tensor<T> u;  // left vector, length rows(W), unit norm
    Tensor<T> v;  // right vector, length cols(W), unit norm
    T sigma{0};   // latest estimate u^T W v
};

template <typename T>
struct DenseParams {
    Tensor<T> weight;  // (in_dim, out_dim); y = x W + b
    Tensor<T> bias;    // (1, out_dim)
    std::optional<SpectralState<T>> spectral;
};

// Layer ids are "dense0", "dense1", ... in network order; graph parameter
// names are "<prefix>.<layer>.weight" and "<prefix>.<layer>.bias".
template <typename T>
struct ParamStore {
    std::map<std::string, DenseParams<T>> layers;

    std::vector<std::string> tensor_names() const;
    Tensor<T>& tensor(const std::string& name);
    const Tensor<T>& tensor(const std::string& name) const;
    bool all_finite() const;

    template <typename U>
    ParamStore<U> cast() const;
};

std::string layer_id(std::size_t dense_index);

template <typename T>
ParamStore<T> init_params(const NetworkSpec& spec, std::uint64_t seed);

template <typename T>
struct SpectralResult {
    Tensor<T> normalized;
    Tensor<T> u;
    Tensor<T> v;
    T sigma{0};
};

// n_iters rounds of v <- W^T u / |W^T u|, u <- W v / |W v|, then
// sigma = u^T W v. Throws DegenerateWeightError for a (numerically) zero W.
template <typename T>
SpectralResult<T> spectral_normalize(const Tensor<T>& weight, const Tensor<T>& u, int n_iters);

// One training-mode refresh of every spectral layer; returns the sigma
// estimates in layer order.
template <typename T>
std::vector<T> advance_spectral_state(ParamStore<T>& params, int n_iters = 1);

enum class Trainable { Yes, No };

// Appends the network to `graph` with input node `x`, returning the output
// node. Discriminator outputs are clamped to (eps, 1 - eps).
template <typename T>
NodeId build_network(Graph<T>& graph, const NetworkSpec& spec, const std::string& prefix, NodeId x,
                     Trainable trainable);

// Binds the weights, biases and spectral vectors that build_network names.
template <typename T>
void bind_network(Bindings<T>& bindings, const ParamStore<T>& params, const std::string& prefix);

// Strips "<prefix>." from gradient names so they match ParamStore::tensor_names().
template <typename T>
Gradients<T> strip_prefix(const Gradients<T>& grads, const std::string& prefix);

template <typename T>
Tensor<T> generator_forward(const ParamStore<T>& params, const NetworkSpec& spec, const Tensor<T>& z_batch);

// In train mode one power iteration runs first and the refreshed state is
// kept in `params`.
template <typename T>
Tensor<T> discriminator_forward(ParamStore<T>& params, const NetworkSpec& spec, const Tensor<T>& x_batch,
                                bool train_mode);

}  // namespace ganlab
