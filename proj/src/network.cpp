#include "ganlab/network.hpp"

#include <cmath>

#include "ganlab/error.hpp"
#include "ganlab/rng.hpp"

namespace ganlab {

std::size_t NetworkSpec::input_dim() const {
    for (const auto& l : layers)
        if (l.kind == LayerKind::Dense) return l.in_dim;
    return 0;
}

std::size_t NetworkSpec::output_dim() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
        if (it->kind == LayerKind::Dense) return it->out_dim;
    return 0;
}

std::size_t NetworkSpec::dense_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.kind == LayerKind::Dense;
    return n;
}

void NetworkSpec::validate() const {
    if (dense_count() == 0) throw ConfigError("network needs at least one dense layer");
    std::size_t dim = input_dim();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.kind == LayerKind::Dense) {
            if (l.in_dim == 0 || l.out_dim == 0) throw ConfigError("dense layer dims must be positive");
            if (l.in_dim != dim)
                throw ConfigError("layer " + std::to_string(i) + " expects " + std::to_string(l.in_dim) +
                                  " inputs but receives " + std::to_string(dim));
            dim = l.out_dim;
        } else if (l.spectral_norm) {
            throw ConfigError("spectral normalization is only defined on dense layers");
        }
    }
    const LayerKind last = layers.back().kind;
    if (role == NetworkRole::Generator) {
        if (last != LayerKind::Tanh && last != LayerKind::Dense)
            throw ConfigError("generator must end in tanh or a linear (identity) head");
        for (const auto& l : layers)
            if (l.spectral_norm) throw ConfigError("spectral normalization is reserved for the discriminator");
    } else {
        if (last != LayerKind::Sigmoid) throw ConfigError("discriminator must end in sigmoid");
        if (output_dim() != 1) throw ConfigError("discriminator must produce one logit per sample");
    }
}

NetworkSpec generator_spec(std::size_t latent_dim, std::size_t data_dim, OutputHead head,
                           const std::vector<std::size_t>& hidden) {
    NetworkSpec spec;
    spec.role = NetworkRole::Generator;
    std::size_t dim = latent_dim;
    for (std::size_t h : hidden) {
        spec.layers.push_back(LayerSpec::dense(dim, h));
        spec.layers.push_back(LayerSpec::activation(LayerKind::LeakyRelu));
        dim = h;
    }
    spec.layers.push_back(LayerSpec::dense(dim, data_dim));
    if (head == OutputHead::Tanh) spec.layers.push_back(LayerSpec::activation(LayerKind::Tanh));
    spec.validate();
    return spec;
}

NetworkSpec discriminator_spec(std::size_t data_dim, const std::vector<std::size_t>& hidden, bool spectral_norm) {
    NetworkSpec spec;
    spec.role = NetworkRole::Discriminator;
    std::size_t dim = data_dim;
    for (std::size_t h : hidden) {
        spec.layers.push_back(LayerSpec::dense(dim, h, spectral_norm));
        spec.layers.push_back(LayerSpec::activation(LayerKind::LeakyRelu));
        dim = h;
    }
    spec.layers.push_back(LayerSpec::dense(dim, 1, spectral_norm));
    spec.layers.push_back(LayerSpec::activation(LayerKind::Sigmoid));
    spec.validate();
    return spec;
}

std::string layer_id(std::size_t dense_index) { return "dense" + std::to_string(dense_index); }

namespace {

std::pair<std::string, std::string> split_name(const std::string& name) {
    const auto dot = name.find('.');
    if (dot == std::string::npos) throw std::out_of_range("parameter name '" + name + "' has no layer part");
    return {name.substr(0, dot), name.substr(dot + 1)};
}

template <typename T>
T normalize_inplace(Tensor<T>& x) {
    const T norm = kernels::l2_norm<T>(x.data());
    if (!(norm > static_cast<T>(kNormEpsilon)))
        throw DegenerateWeightError("power iteration collapsed: weight matrix is (numerically) zero");
    for (T& e : x.data()) e /= norm;
    return norm;
}

// W^T u for W (rows, cols), u of length rows.
template <typename T>
Tensor<T> left_apply(const Tensor<T>& w, const Tensor<T>& u) {
    const std::size_t rows = w.rows(), cols = w.cols();
    Tensor<T> out({cols});
    for (std::size_t i = 0; i < rows; ++i) {
        const T ui = u[i];
        auto wrow = w.row(i);
        for (std::size_t j = 0; j < cols; ++j) out[j] += ui * wrow[j];
    }
    return out;
}

// W v for v of length cols.
template <typename T>
Tensor<T> right_apply(const Tensor<T>& w, const Tensor<T>& v) {
    const std::size_t rows = w.rows();
    Tensor<T> out({rows});
    for (std::size_t i = 0; i < rows; ++i) out[i] = kernels::dot<T>(w.row(i), v.data());
    return out;
}

template <typename T>
SpectralState<T> power_iterate(const Tensor<T>& w, const Tensor<T>& u0, int n_iters) {
    if (n_iters < 1) throw std::invalid_argument("power iteration needs n_iters >= 1");
    if (u0.numel() != w.rows())
        throw ShapeError("u_state length " + std::to_string(u0.numel()) + " does not match weight " +
                         shape_str(w.shape()));
    SpectralState<T> s;
    s.u = u0.reshaped({u0.numel()});
    for (int it = 0; it < n_iters; ++it) {
        s.v = left_apply(w, s.u);
        normalize_inplace(s.v);
        s.u = right_apply(w, s.v);
        normalize_inplace(s.u);
    }
    s.sigma = kernels::dot<T>(s.u.data(), right_apply(w, s.v).data());
    return s;
}

template <typename T>
Tensor<T> random_unit(Rng& rng, std::size_t n) {
    Tensor<T> u({n});
    for (T& e : u.data()) e = static_cast<T>(rng.normal());
    normalize_inplace(u);
    return u;
}

}  // namespace

template <typename T>
std::vector<std::string> ParamStore<T>::tensor_names() const {
    std::vector<std::string> names;
    for (const auto& [id, layer] : layers) {
        names.push_back(id + ".weight");
        names.push_back(id + ".bias");
    }
    return names;
}

template <typename T>
Tensor<T>& ParamStore<T>::tensor(const std::string& name) {
    auto [id, field] = split_name(name);
    auto& layer = layers.at(id);
    if (field == "weight") return layer.weight;
    if (field == "bias") return layer.bias;
    throw std::out_of_range("unknown parameter field '" + name + "'");
}

template <typename T>
const Tensor<T>& ParamStore<T>::tensor(const std::string& name) const {
    return const_cast<ParamStore<T>&>(*this).tensor(name);
}

template <typename T>
bool ParamStore<T>::all_finite() const {
    for (const auto& [id, layer] : layers)
        if (!layer.weight.all_finite() || !layer.bias.all_finite()) return false;
    return true;
}

template <typename T>
template <typename U>
ParamStore<U> ParamStore<T>::cast() const {
    ParamStore<U> out;
    for (const auto& [id, layer] : layers) {
        DenseParams<U> p;
        p.weight = layer.weight.template cast<U>();
        p.bias = layer.bias.template cast<U>();
        if (layer.spectral)
            p.spectral = SpectralState<U>{layer.spectral->u.template cast<U>(), layer.spectral->v.template cast<U>(),
                                          static_cast<U>(layer.spectral->sigma)};
        out.layers.emplace(id, std::move(p));
    }
    return out;
}

template <typename T>
ParamStore<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamStore<T> store;
    std::size_t dense = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        if (l.kind != LayerKind::Dense) continue;
        const bool leaky_next = i + 1 < spec.layers.size() && spec.layers[i + 1].kind == LayerKind::LeakyRelu;
        const double stddev = std::sqrt((leaky_next ? 2.0 : 1.0) / static_cast<double>(l.in_dim));
        DenseParams<T> p;
        p.weight = Tensor<T>({l.in_dim, l.out_dim});
        for (T& w : p.weight.data()) w = static_cast<T>(stddev * rng.normal());
        p.bias = Tensor<T>({1, l.out_dim});
        if (l.spectral_norm) {
            SpectralState<T> s;
            s.u = random_unit<T>(rng, l.in_dim);
            s.v = left_apply(p.weight, s.u);
            normalize_inplace(s.v);
            s.sigma = kernels::dot<T>(s.u.data(), right_apply(p.weight, s.v).data());
            p.spectral = std::move(s);
        }
        store.layers.emplace(layer_id(dense++), std::move(p));
    }
    return store;
}

template <typename T>
SpectralResult<T> spectral_normalize(const Tensor<T>& weight, const Tensor<T>& u, int n_iters) {
    SpectralState<T> s = power_iterate(weight, u, n_iters);
    if (!(s.sigma > static_cast<T>(kNormEpsilon)))
        throw DegenerateWeightError("spectral estimate is not positive");
    SpectralResult<T> r;
    r.normalized = weight;
    const T inv = T{1} / s.sigma;
    for (T& w : r.normalized.data()) w *= inv;
    r.u = std::move(s.u);
    r.v = std::move(s.v);
    r.sigma = s.sigma;
    return r;
}

template <typename T>
std::vector<T> advance_spectral_state(ParamStore<T>& params, int n_iters) {
    std::vector<T> sigmas;
    for (auto& [id, layer] : params.layers) {
        if (!layer.spectral) continue;
        layer.spectral = power_iterate(layer.weight, layer.spectral->u, n_iters);
        sigmas.push_back(layer.spectral->sigma);
    }
    return sigmas;
}

template <typename T>
NodeId build_network(Graph<T>& graph, const NetworkSpec& spec, const std::string& prefix, NodeId x,
                     Trainable trainable) {
    spec.validate();
    auto leaf = [&](const std::string& name) {
        return trainable == Trainable::Yes ? graph.parameter(name) : graph.input(name);
    };
    NodeId h = x;
    std::size_t dense = 0;
    for (const auto& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::Dense: {
                const std::string base = prefix + "." + layer_id(dense++);
                NodeId w = leaf(base + ".weight");
                if (l.spectral_norm) w = graph.spectral_div(w, graph.input(base + ".sn_u"), graph.input(base + ".sn_v"));
                h = graph.add(graph.matmul(h, w), leaf(base + ".bias"));
                break;
            }
            case LayerKind::LeakyRelu: h = graph.leaky_relu(h); break;
            case LayerKind::Tanh: h = graph.tanh(h); break;
            case LayerKind::Sigmoid: h = graph.sigmoid(h); break;
        }
    }
    if (spec.role == NetworkRole::Discriminator) {
        const T eps = static_cast<T>(kProbabilityEpsilon);
        h = graph.clamp(h, eps, T{1} - eps);
    }
    return h;
}

template <typename T>
void bind_network(Bindings<T>& bindings, const ParamStore<T>& params, const std::string& prefix) {
    for (const auto& [id, layer] : params.layers) {
        const std::string base = prefix + "." + id;
        bindings[base + ".weight"] = layer.weight;
        bindings[base + ".bias"] = layer.bias;
        if (layer.spectral) {
            bindings[base + ".sn_u"] = layer.spectral->u;
            bindings[base + ".sn_v"] = layer.spectral->v;
        }
    }
}

template <typename T>
Gradients<T> strip_prefix(const Gradients<T>& grads, const std::string& prefix) {
    Gradients<T> out;
    const std::string head = prefix + ".";
    for (const auto& [name, g] : grads)
        if (name.starts_with(head)) out.emplace(name.substr(head.size()), g);
    return out;
}

template <typename T>
Tensor<T> generator_forward(const ParamStore<T>& params, const NetworkSpec& spec, const Tensor<T>& z_batch) {
    if (z_batch.rank() != 2 || z_batch.cols() != spec.input_dim())
        throw ShapeError("generator expects (batch, " + std::to_string(spec.input_dim()) + ") latents, got " +
                         shape_str(z_batch.shape()));
    Graph<T> graph;
    build_network(graph, spec, "g", graph.input("z"), Trainable::No);
    Bindings<T> b;
    bind_network(b, params, "g");
    b["z"] = z_batch;
    return graph.forward(b);
}

template <typename T>
Tensor<T> discriminator_forward(ParamStore<T>& params, const NetworkSpec& spec, const Tensor<T>& x_batch,
                                bool train_mode) {
    if (x_batch.rank() != 2 || x_batch.cols() != spec.input_dim())
        throw ShapeError("discriminator expects (batch, " + std::to_string(spec.input_dim()) + ") samples, got " +
                         shape_str(x_batch.shape()));
    if (train_mode) advance_spectral_state(params, 1);
    Graph<T> graph;
    build_network(graph, spec, "d", graph.input("x"), Trainable::No);
    Bindings<T> b;
    bind_network(b, params, "d");
    b["x"] = x_batch;
    return graph.forward(b);
}

#define GANLAB_INSTANTIATE(T)                                                                                    \
    template struct ParamStore<T>;                                                                               \
    template ParamStore<T> init_params<T>(const NetworkSpec&, std::uint64_t);                                    \
    template SpectralResult<T> spectral_normalize<T>(const Tensor<T>&, const Tensor<T>&, int);                   \
    template std::vector<T> advance_spectral_state<T>(ParamStore<T>&, int);                                      \
    template NodeId build_network<T>(Graph<T>&, const NetworkSpec&, const std::string&, NodeId, Trainable);      \
    template void bind_network<T>(Bindings<T>&, const ParamStore<T>&, const std::string&);                       \
    template Gradients<T> strip_prefix<T>(const Gradients<T>&, const std::string&);                              \
    template Tensor<T> generator_forward<T>(const ParamStore<T>&, const NetworkSpec&, const Tensor<T>&);         \
    template Tensor<T> discriminator_forward<T>(ParamStore<T>&, const NetworkSpec&, const Tensor<T>&, bool);

GANLAB_INSTANTIATE(float)
GANLAB_INSTANTIATE(double)
#undef GANLAB_INSTANTIATE

template ParamStore<double> ParamStore<float>::cast<double>() const;
template ParamStore<float> ParamStore<double>::cast<float>() const;
template ParamStore<double> ParamStore<double>::cast<double>() const;
template ParamStore<float> ParamStore<float>::cast<float>() const;

}  // namespace ganlab
