#pragma once

// Restricted Boltzmann machine with +-1 units.
// E(v,h) = -sum_a b^h_a h_a - sum_ia v_i W_ia h_a - sum_i b^v_i v_i
// p(h_a=1|v) = (1 + tanh(sum_i W_ia v_i + b^h_a)) / 2, and symmetrically for
// visibles. Contrastive divergence trains on either tanh expectations
// (default; matches the closed-form update rules) or sampled +-1 states.
//
// Gradient orientation: dKL/dW_ia = <v_i h_a>_model - <v_i h_a>_data, so the
// descent update is W += eta (<vh>_data - <vh>_model). Training must
// decrease the exact KL on enumerable systems; the test suite checks this
// against finite differences.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgml/dataset.hpp"
#include "rgml/io_util.hpp"
#include "rgml/rng.hpp"

namespace rgml {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Propagation : uint8_t { expectation = 0, stochastic = 1 };

struct RbmParams {
    MatrixXd W;    // N_v x N_h
    VectorXd bv;   // visible bias
    VectorXd bh;   // hidden bias

    int n_visible() const { return static_cast<int>(W.rows()); }
    int n_hidden() const { return static_cast<int>(W.cols()); }
};

inline RbmParams init_rbm(int n_visible, int n_hidden, uint64_t seed, double scale = 0.01) {
    RbmParams p;
    p.W.resize(n_visible, n_hidden);
    Rng rng(seed);
    for (int i = 0; i < n_visible; ++i)
        for (int a = 0; a < n_hidden; ++a) p.W(i, a) = rng.uniform(-scale, scale);
    p.bv = VectorXd::Zero(n_visible);
    p.bh = VectorXd::Zero(n_hidden);
    return p;
}

inline double rbm_energy(const RbmParams& p, const VectorXd& v, const VectorXd& h) {
    if (v.size() != p.W.rows() || h.size() != p.W.cols())
        throw std::invalid_argument("rbm_energy dimension mismatch");
    return -p.bh.dot(h) - v.dot(p.W * h) - p.bv.dot(v);
}

inline VectorXd hidden_expectation(const RbmParams& p, const VectorXd& v) {
    return ((p.W.transpose() * v) + p.bh).array().tanh();
}

inline VectorXd visible_expectation(const RbmParams& p, const VectorXd& h) {
    return ((p.W * h) + p.bv).array().tanh();
}

inline VectorXd hidden_conditional(const RbmParams& p, const VectorXd& v) {
    return (1.0 + hidden_expectation(p, v).array()) / 2.0;
}

inline VectorXd visible_conditional(const RbmParams& p, const VectorXd& h) {
    return (1.0 + visible_expectation(p, h).array()) / 2.0;
}

// +-1 sample from per-unit probabilities of being +1.
inline VectorXd sample_pm1(const VectorXd& prob_plus, Rng& rng) {
    VectorXd out(prob_plus.size());
    for (int i = 0; i < out.size(); ++i) out[i] = rng.uniform() < prob_plus[i] ? 1.0 : -1.0;
    return out;
}

struct CdConfig {
    double learning_rate = 0.01;
    int iterations = 1;
    int cd_steps = 1;
    int batch_size = 0;  // 0 = full batch
    Propagation propagation = Propagation::expectation;
    uint64_t seed = 1;
};

struct TrainStats {
    std::vector<double> reconstruction_error;  // mean squared v - v~ per iteration
    std::vector<double> gradient_norm;         // Frobenius norm of the W gradient estimate
};

namespace detail {

// Batch rows are visible vectors. Returns tanh(X W + bh row-broadcast) or a
// +-1 sample of it.
inline MatrixXd propagate_hidden(const RbmParams& p, const MatrixXd& X, Propagation mode,
                                 Rng& rng) {
    MatrixXd H = ((X * p.W).rowwise() + p.bh.transpose()).array().tanh();
    if (mode == Propagation::stochastic)
        for (int r = 0; r < H.rows(); ++r)
            for (int c = 0; c < H.cols(); ++c)
                H(r, c) = rng.uniform() < (1 + H(r, c)) / 2 ? 1.0 : -1.0;
    return H;
}

inline MatrixXd propagate_visible(const RbmParams& p, const MatrixXd& H, Propagation mode,
                                  Rng& rng) {
    MatrixXd V = ((H * p.W.transpose()).rowwise() + p.bv.transpose()).array().tanh();
    if (mode == Propagation::stochastic)
        for (int r = 0; r < V.rows(); ++r)
            for (int c = 0; c < V.cols(); ++c)
                V(r, c) = rng.uniform() < (1 + V(r, c)) / 2 ? 1.0 : -1.0;
    return V;
}

}  // namespace detail

// One CD update on one batch. Data statistics pair the raw visibles with
// their hidden propagation; model statistics come from cd_steps rounds of
// reconstruct-visible / re-propagate-hidden.
inline void cd_update(RbmParams& p, const MatrixXd& batch, const CdConfig& cfg, Rng& rng,
                      double* recon_error = nullptr, double* grad_norm = nullptr) {
    if (batch.cols() != p.W.rows()) throw std::invalid_argument("cd_update dimension mismatch");
    const double n = static_cast<double>(batch.rows());
    MatrixXd H0 = detail::propagate_hidden(p, batch, cfg.propagation, rng);
    MatrixXd Cd = batch.transpose() * H0 / n;
    VectorXd vd = batch.colwise().mean();
    VectorXd hd = H0.colwise().mean();

    MatrixXd V = batch, H = H0;
    for (int k = 0; k < cfg.cd_steps; ++k) {
        V = detail::propagate_visible(p, H, cfg.propagation, rng);
        H = detail::propagate_hidden(p, V, cfg.propagation, rng);
    }
    MatrixXd Cm = V.transpose() * H / n;
    VectorXd vm = V.colwise().mean();
    VectorXd hm = H.colwise().mean();

    if (recon_error) *recon_error = (batch - V).squaredNorm() / n;
    MatrixXd gW = Cd - Cm;
    if (grad_norm) *grad_norm = gW.norm();
    p.W += cfg.learning_rate * gW;
    p.bv += cfg.learning_rate * (vd - vm);
    p.bh += cfg.learning_rate * (hd - hm);
}

inline MatrixXd ensemble_matrix(const Ensemble& e) {
    MatrixXd X(e.size(), e.n_sites());
    for (size_t s = 0; s < e.size(); ++s)
        for (int i = 0; i < e.n_sites(); ++i) X(s, i) = e.at(s, i);
    return X;
}

// Iterates cd_update over minibatches (sequential slices of a seeded
// shuffle, reshuffled each pass through the data).
inline TrainStats train(RbmParams& p, const MatrixXd& data, const CdConfig& cfg) {
    if (data.rows() == 0) throw std::invalid_argument("empty training set");
    Rng rng(cfg.seed);
    TrainStats stats;
    stats.reconstruction_error.reserve(cfg.iterations);
    stats.gradient_norm.reserve(cfg.iterations);
    const int n = static_cast<int>(data.rows());
    const int bs = cfg.batch_size > 0 ? std::min(cfg.batch_size, n) : n;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    int cursor = n;  // force shuffle on first use
    MatrixXd batch(bs, data.cols());
    for (int it = 0; it < cfg.iterations; ++it) {
        if (bs == n) {
            double re, gn;
            cd_update(p, data, cfg, rng, &re, &gn);
            stats.reconstruction_error.push_back(re);
            stats.gradient_norm.push_back(gn);
            continue;
        }
        if (cursor + bs > n) {
            for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
            cursor = 0;
        }
        for (int r = 0; r < bs; ++r) batch.row(r) = data.row(order[cursor + r]);
        cursor += bs;
        double re, gn;
        cd_update(p, batch, cfg, rng, &re, &gn);
        stats.reconstruction_error.push_back(re);
        stats.gradient_norm.push_back(gn);
    }
    return stats;
}

// Layerwise pretraining: train layer 1 on the data, push the data through
// it (expectation or sampling per config), train layer 2 on that, etc.
inline std::vector<RbmParams> stack_train(const MatrixXd& data,
                                          const std::vector<int>& layer_sizes,
                                          const CdConfig& cfg,
                                          std::vector<TrainStats>* stats_out = nullptr) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("need at least one layer pair");
    if (layer_sizes[0] != data.cols()) throw std::invalid_argument("first layer size != data width");
    for (size_t i = 1; i < layer_sizes.size(); ++i)
        if (layer_sizes[i] >= layer_sizes[i - 1])
            throw std::invalid_argument("layer sizes must strictly decrease");
    std::vector<RbmParams> layers;
    MatrixXd X = data;
    Rng master(cfg.seed);
    for (size_t i = 1; i < layer_sizes.size(); ++i) {
        RbmParams p = init_rbm(layer_sizes[i - 1], layer_sizes[i], master.derive(2 * i).seed());
        CdConfig layer_cfg = cfg;
        layer_cfg.seed = master.derive(2 * i + 1).seed();
        TrainStats st = train(p, X, layer_cfg);
        if (stats_out) stats_out->push_back(std::move(st));
        Rng prop(master.derive(1000 + i).seed());
        X = detail::propagate_hidden(p, X, cfg.propagation, prop);
        layers.push_back(std::move(p));
    }
    return layers;
}

// Propagates an input batch through trained layers, returning each layer's
// hidden output (layer_outputs[k] has layer_sizes[k+1] columns).
inline std::vector<MatrixXd> stack_forward(const std::vector<RbmParams>& layers,
                                           const MatrixXd& input, Propagation mode,
                                           uint64_t seed) {
    std::vector<MatrixXd> out;
    MatrixXd X = input;
    Rng master(seed);
    for (size_t i = 0; i < layers.size(); ++i) {
        Rng r = master.derive(i);
        X = detail::propagate_hidden(layers[i], X, mode, r);
        out.push_back(X);
    }
    return out;
}

// RBM1 checkpoint: magic, N_v u32, N_h u32, propagation u8, seed u64, then
// W row-major, b_v, b_h as little-endian f64.
inline std::string serialize_rbm(const RbmParams& p, Propagation prop, uint64_t seed) {
    std::string out = "RBM1";
    put_le<uint32_t>(out, static_cast<uint32_t>(p.n_visible()));
    put_le<uint32_t>(out, static_cast<uint32_t>(p.n_hidden()));
    put_le<uint8_t>(out, static_cast<uint8_t>(prop));
    put_le<uint64_t>(out, seed);
    for (int i = 0; i < p.W.rows(); ++i)
        for (int a = 0; a < p.W.cols(); ++a) put_le<double>(out, p.W(i, a));
    for (int i = 0; i < p.bv.size(); ++i) put_le<double>(out, p.bv[i]);
    for (int a = 0; a < p.bh.size(); ++a) put_le<double>(out, p.bh[a]);
    return out;
}

inline RbmParams deserialize_rbm(const std::string& in, Propagation* prop = nullptr,
                                 uint64_t* seed = nullptr) {
    size_t pos = 0;
    if (in.size() < 4 || in.compare(0, 4, "RBM1") != 0) throw IoError("bad magic: expected RBM1");
    pos = 4;
    uint32_t nv = get_le<uint32_t>(in, pos);
    uint32_t nh = get_le<uint32_t>(in, pos);
    uint8_t pr = get_le<uint8_t>(in, pos);
    uint64_t sd = get_le<uint64_t>(in, pos);
    if (prop) *prop = static_cast<Propagation>(pr);
    if (seed) *seed = sd;
    RbmParams p;
    p.W.resize(nv, nh);
    for (uint32_t i = 0; i < nv; ++i)
        for (uint32_t a = 0; a < nh; ++a) p.W(i, a) = get_le<double>(in, pos);
    p.bv.resize(nv);
    for (uint32_t i = 0; i < nv; ++i) p.bv[i] = get_le<double>(in, pos);
    p.bh.resize(nh);
    for (uint32_t a = 0; a < nh; ++a) p.bh[a] = get_le<double>(in, pos);
    return p;
}

inline void save_rbm(const RbmParams& p, Propagation prop, uint64_t seed, const std::string& path) {
    atomic_write_file(path, serialize_rbm(p, prop, seed));
}

inline RbmParams load_rbm(const std::string& path, Propagation* prop = nullptr,
                          uint64_t* seed = nullptr) {
    return deserialize_rbm(read_file(path), prop, seed);
}

}  // namespace rgml
