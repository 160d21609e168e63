#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ganlab/autodiff.hpp"
#include "ganlab/checkpoint.hpp"
#include "ganlab/network.hpp"

namespace ganlab {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::map<std::string, Tensor<T>> m;  // first moment, keyed like ParamStore::tensor_names()
    std::map<std::string, Tensor<T>> v;  // second moment

    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

// One bias-corrected ADAM descent step over every tensor in `params`.
// `grads` must name exactly the parameter set. Any non-finite gradient
// aborts the step before anything is modified.
template <typename T>
void adam_step(AdamState<T>& state, ParamStore<T>& params, const Gradients<T>& grads);

template <typename T>
struct EmaState {
    double decay = 0.999;
    ParamStore<T> shadow;
};

template <typename T>
EmaState<T> make_ema(const ParamStore<T>& params, double decay);

// shadow <- decay * shadow + (1 - decay) * params
template <typename T>
void ema_update(EmaState<T>& ema, const ParamStore<T>& params);

template <typename T>
void store_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState<T>& state);
template <typename T>
AdamState<T> load_adam(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace ganlab
