#pragma once

// Helpers shared by the unit tests and the acceptance runner. Everything
// here is an independent oracle or fixture builder; none of it calls into
// the code under test except to build graphs that are then checked.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ganlab/autodiff.hpp"
#include "ganlab/evaluation.hpp"
#include "ganlab/rng.hpp"
#include "ganlab/tensor.hpp"

namespace ganlab::testing {

inline Tensor<double> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Tensor<double> t({r, c});
    for (auto& x : t.data()) x = nd(gen);
    return t;
}

inline double svd_top(const Tensor<double>& w) {
    Eigen::MatrixXd m(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) m(i, j) = w(i, j);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

inline double relative_error(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// A small random MLP built from graph primitives, used for gradient checks.
struct RandomNet {
    Graph<double> graph;
    Bindings<double> bindings;
    std::vector<std::string> params;
    std::vector<NodeId> kink_inputs;  // leaky_relu pre-activations
    std::vector<NodeId> clamp_inputs;
};

inline RandomNet make_random_net(std::mt19937_64& gen) {
    RandomNet net;
    auto& g = net.graph;
    std::uniform_int_distribution<std::size_t> width(1, 32), depth(1, 3), batch(1, 6), act(0, 2), coin(0, 1);
    const std::size_t b = batch(gen);
    std::size_t in = width(gen);
    NodeId h = g.input("x");
    net.bindings["x"] = random_matrix(b, in, gen);
    const std::size_t layers = depth(gen);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t out = l + 1 == layers ? std::max<std::size_t>(1, width(gen) / 4) : width(gen);
        const std::string w = "w" + std::to_string(l), bias = "b" + std::to_string(l);
        NodeId wn = g.parameter(w);
        net.bindings[w] = random_matrix(in, out, gen, 1.0 / std::sqrt(static_cast<double>(in)));
        if (coin(gen)) {
            // spectral_div with fixed (u, v): exercises the SN backward rule.
            const std::string u = "u" + std::to_string(l), v = "v" + std::to_string(l);
            net.bindings[u] = random_matrix(in, 1, gen);
            net.bindings[v] = random_matrix(out, 1, gen);
            for (auto* t : {&net.bindings[u], &net.bindings[v]}) {
                double s = 0;
                for (double x : t->data()) s += x * x;
                for (auto& x : t->data()) x /= std::sqrt(s);
            }
            // Make u^T W v positive and away from zero so 1/sigma is well conditioned.
            auto& uu = net.bindings[u];
            auto& vv = net.bindings[v];
            auto& ww = net.bindings[w];
            double sigma = 0;
            for (std::size_t i = 0; i < in; ++i)
                for (std::size_t j = 0; j < out; ++j) sigma += uu(i, 0) * ww(i, j) * vv(j, 0);
            if (sigma < 0) {
                for (auto& x : vv.data()) x = -x;
                sigma = -sigma;
            }
            if (sigma < 0.2)
                for (std::size_t i = 0; i < in; ++i)
                    for (std::size_t j = 0; j < out; ++j) ww(i, j) += 0.5 * uu(i, 0) * vv(j, 0);
            wn = g.spectral_div(wn, g.input(u), g.input(v));
        }
        NodeId y = g.matmul(h, wn);
        y = g.add(y, g.parameter(bias));
        net.bindings[bias] = random_matrix(1, out, gen, 0.1);
        net.params.push_back(w);
        net.params.push_back(bias);
        switch (act(gen)) {
            case 0:
                net.kink_inputs.push_back(y);
                h = g.leaky_relu(y);
                break;
            case 1: h = g.tanh(y); break;
            default: h = g.sigmoid(y); break;
        }
        in = out;
    }
    // Loss head: plain mean, or a clamped log-probability.
    if (coin(gen)) {
        const NodeId p = g.sigmoid(h);
        net.clamp_inputs.push_back(p);
        g.mean(g.log(g.clamp(p, 1e-7, 1 - 1e-7)));
    } else {
        g.mean(g.mul(h, h));
    }
    return net;
}

// True when every leaky_relu input is at least `margin` from the kink and no
// clamp is saturated, so central differences see a smooth function.
inline bool smooth_at(RandomNet& net, double margin) {
    net.graph.forward(net.bindings);
    for (NodeId id : net.kink_inputs)
        for (double v : net.graph.value(id).data())
            if (std::abs(v) < margin) return false;
    for (NodeId id : net.clamp_inputs)
        for (double v : net.graph.value(id).data())
            if (v < 1e-6 || v > 1 - 1e-6) return false;
    return true;
}

// Central finite differences of the graph root w.r.t. every entry of `name`.
inline Tensor<double> finite_difference(RandomNet& net, const std::string& name, double h) {
    Tensor<double>& p = net.bindings.at(name);
    Tensor<double> grad(p.shape());
    for (std::size_t i = 0; i < p.numel(); ++i) {
        const double orig = p[i];
        p[i] = orig + h;
        const double up = net.graph.forward(net.bindings).item();
        p[i] = orig - h;
        const double down = net.graph.forward(net.bindings).item();
        p[i] = orig;
        grad[i] = (up - down) / (2 * h);
    }
    return grad;
}

// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
inline double tensor_rel_error(const Tensor<double>& a, const Tensor<double>& b, double floor = 1e-8) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

// Exhaustive double loop with explicit lowest-index tie-break.
inline std::vector<Neighbor> brute_nn(const Tensor<double>& q, const Tensor<double>& c,
                                      const std::function<double(std::span<const double>, std::span<const double>)>& d) {
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < q.rows(); ++i) {
        Neighbor best{0, std::numeric_limits<double>::infinity()};
        for (std::size_t j = 0; j < c.rows(); ++j) {
            const double dist = d(q.row(i), c.row(j));
            if (dist < best.distance || (dist == best.distance && j < best.index)) best = {j, dist};
        }
        out.push_back(best);
    }
    return out;
}

inline double oracle_pixel_image(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs((a[i] + 1) * 127.5 - (b[i] + 1) * 127.5);
    return s / static_cast<double>(a.size());
}

inline double oracle_l1_mean(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

inline double oracle_l2(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ganlab_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace ganlab::testing

namespace ganlab {

template <typename T>
void PrintTo(const Tensor<T>& t, std::ostream* os) {
    *os << shape_str(t.shape()) << " [";
    const std::size_t shown = std::min<std::size_t>(t.numel(), 8);
    for (std::size_t i = 0; i < shown; ++i) *os << (i ? ", " : "") << std::setprecision(17) << t[i];
    *os << (t.numel() > shown ? ", ...]" : "]");
}

}  // namespace ganlab
