#include "ganlab/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "ganlab/error.hpp"

namespace ganlab {

template <typename T>
void adam_step(AdamState<T>& state, ParamStore<T>& params, const Gradients<T>& grads) {
    const auto names = params.tensor_names();
    if (grads.size() != names.size())
        throw std::invalid_argument("adam_step: got " + std::to_string(grads.size()) + " gradients for " +
                                    std::to_string(names.size()) + " parameters");
    for (const auto& name : names) {
        auto it = grads.find(name);
        if (it == grads.end()) throw std::invalid_argument("adam_step: missing gradient for '" + name + "'");
        if (it->second.shape() != params.tensor(name).shape())
            throw ShapeError("adam_step: gradient shape mismatch for '" + name + "'");
        const auto g = it->second.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) {
                std::ostringstream os;
                os << "adam_step " << state.step + 1 << ": non-finite gradient " << g[i] << " at '" << name << "'["
                   << i << "]";
                throw NumericError(os.str());
            }
        }
    }

    const AdamConfig& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(c.beta1);
    const T b2 = static_cast<T>(c.beta2);
    const T one_b1 = static_cast<T>(1.0 - c.beta1);
    const T one_b2 = static_cast<T>(1.0 - c.beta2);
    const T correction1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
    const T lr = static_cast<T>(c.lr);
    const T eps = static_cast<T>(c.eps);

    for (const auto& name : names) {
        Tensor<T>& p = params.tensor(name);
        const Tensor<T>& g = grads.at(name);
        auto [mit, m_new] = state.m.try_emplace(name, p.shape());
        auto [vit, v_new] = state.v.try_emplace(name, p.shape());
        auto pd = p.data();
        auto gd = g.data();
        auto md = mit->second.data();
        auto vd = vit->second.data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            md[i] = b1 * md[i] + one_b1 * gd[i];
            vd[i] = b2 * vd[i] + one_b2 * gd[i] * gd[i];
            const T m_hat = md[i] / correction1;
            const T v_hat = vd[i] / correction2;
            pd[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

template <typename T>
EmaState<T> make_ema(const ParamStore<T>& params, double decay) {
    if (!(decay >= 0.0 && decay <= 1.0)) throw std::invalid_argument("EMA decay must lie in [0, 1]");
    EmaState<T> ema;
    ema.decay = decay;
    ema.shadow = params;
    return ema;
}

template <typename T>
void ema_update(EmaState<T>& ema, const ParamStore<T>& params) {
    const T d = static_cast<T>(ema.decay);
    const T w = static_cast<T>(1.0 - ema.decay);
    for (const auto& name : params.tensor_names()) {
        Tensor<T>& s = ema.shadow.tensor(name);
        const Tensor<T>& p = params.tensor(name);
        if (s.shape() != p.shape()) throw ShapeError("ema_update: shape mismatch for '" + name + "'");
        auto sd = s.data();
        auto pd = p.data();
        for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = d * sd[i] + w * pd[i];
    }
}

template <typename T>
void store_adam(Checkpoint& ckpt, const std::string& prefix, const AdamState<T>& state) {
    ckpt.put_scalar(prefix + ".step", static_cast<double>(state.step));
    ckpt.put_scalar(prefix + ".lr", state.config.lr);
    ckpt.put_scalar(prefix + ".beta1", state.config.beta1);
    ckpt.put_scalar(prefix + ".beta2", state.config.beta2);
    ckpt.put_scalar(prefix + ".eps", state.config.eps);
    for (const auto& [name, m] : state.m) ckpt.put_tensor(prefix + ".m." + name, m);
    for (const auto& [name, v] : state.v) ckpt.put_tensor(prefix + ".v." + name, v);
}

template <typename T>
AdamState<T> load_adam(const Checkpoint& ckpt, const std::string& prefix) {
    AdamState<T> state;
    state.step = static_cast<std::uint64_t>(ckpt.scalar(prefix + ".step"));
    state.config.lr = ckpt.scalar(prefix + ".lr");
    state.config.beta1 = ckpt.scalar(prefix + ".beta1");
    state.config.beta2 = ckpt.scalar(prefix + ".beta2");
    state.config.eps = ckpt.scalar(prefix + ".eps");
    const std::string m_head = prefix + ".m.", v_head = prefix + ".v.";
    for (const auto& key : ckpt.keys()) {
        if (key.starts_with(m_head)) state.m.emplace(key.substr(m_head.size()), ckpt.get_tensor<T>(key));
        if (key.starts_with(v_head)) state.v.emplace(key.substr(v_head.size()), ckpt.get_tensor<T>(key));
    }
    return state;
}

#define GANLAB_INSTANTIATE(T)                                                                  \
    template void adam_step<T>(AdamState<T>&, ParamStore<T>&, const Gradients<T>&);            \
    template EmaState<T> make_ema<T>(const ParamStore<T>&, double);                            \
    template void ema_update<T>(EmaState<T>&, const ParamStore<T>&);                           \
    template void store_adam<T>(Checkpoint&, const std::string&, const AdamState<T>&);         \
    template AdamState<T> load_adam<T>(const Checkpoint&, const std::string&);

GANLAB_INSTANTIATE(float)
GANLAB_INSTANTIATE(double)
#undef GANLAB_INSTANTIATE

}  // namespace ganlab
