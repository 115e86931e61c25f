#pragma once

// Two-layer temperature classifier: input -> tanh hidden -> softmax over
// temperature bins. Trained by plain gradient descent on the KL loss to a
// one-hot target (cross entropy), with a seeded stratified validation split.
// The default bin grid is 0.0 .. 5.9 in steps of 0.1 (60 bins); the 0.0 bin
// exists as a label but the sampling grid starts at 0.1, so it simply never
// receives training data.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgml/io_util.hpp"
#include "rgml/rng.hpp"

namespace rgml {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

struct TempBins {
    std::vector<double> temperatures;

    static TempBins default_bins() {
        TempBins b;
        for (int i = 0; i < 60; ++i) b.temperatures.push_back(i / 10.0);
        return b;
    }
    int size() const { return static_cast<int>(temperatures.size()); }
    // Nearest bin; grid spacing 0.1 means round(10 T) for the default bins.
    int index_of(double T) const {
        int best = 0;
        double bd = std::abs(temperatures[0] - T);
        for (int i = 1; i < size(); ++i) {
            double d = std::abs(temperatures[i] - T);
            if (d < bd) { bd = d; best = i; }
        }
        return best;
    }
};

struct MlpParams {
    MatrixXd W1;  // N_in x N_hid
    VectorXd b1;
    MatrixXd W2;  // N_hid x N_out
    VectorXd b2;

    int n_in() const { return static_cast<int>(W1.rows()); }
    int n_hidden() const { return static_cast<int>(W1.cols()); }
    int n_out() const { return static_cast<int>(W2.cols()); }
};

// Hidden width rule: 0.8 of the input size, floored at 16 (gives the
// canonical 100 -> 80 -> 60 shape for 10x10 input).
inline int default_hidden_size(int n_in) {
    return std::max(16, static_cast<int>(std::lround(0.8 * n_in)));
}

// Uniform(+-1/sqrt(fan_in)) weights, zero biases.
inline MlpParams init_mlp(int n_in, int n_hidden, int n_out, uint64_t seed) {
    MlpParams p;
    Rng rng(seed);
    p.W1.resize(n_in, n_hidden);
    double s1 = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (int i = 0; i < n_in; ++i)
        for (int j = 0; j < n_hidden; ++j) p.W1(i, j) = rng.uniform(-s1, s1);
    p.b1 = VectorXd::Zero(n_hidden);
    p.W2.resize(n_hidden, n_out);
    double s2 = 1.0 / std::sqrt(static_cast<double>(n_hidden));
    for (int i = 0; i < n_hidden; ++i)
        for (int j = 0; j < n_out; ++j) p.W2(i, j) = rng.uniform(-s2, s2);
    p.b2 = VectorXd::Zero(n_out);
    return p;
}

namespace detail {

inline MatrixXd softmax_rows(MatrixXd Z) {
    for (int r = 0; r < Z.rows(); ++r) {
        double m = Z.row(r).maxCoeff();
        Z.row(r) = (Z.row(r).array() - m).exp();
        Z.row(r) /= Z.row(r).sum();
    }
    return Z;
}

}  // namespace detail

inline MatrixXd forward_batch(const MlpParams& p, const MatrixXd& X) {
    if (X.cols() != p.W1.rows()) throw std::invalid_argument("forward dimension mismatch");
    MatrixXd H = ((X * p.W1).rowwise() + p.b1.transpose()).array().tanh();
    return detail::softmax_rows((H * p.W2).rowwise() + p.b2.transpose());
}

inline VectorXd forward(const MlpParams& p, const VectorXd& x) {
    return forward_batch(p, x.transpose()).row(0).transpose();
}

inline double kl_loss(const VectorXd& predicted, int target_index) {
    double q = predicted[target_index];
    if (q <= 0) throw std::overflow_error("zero predicted probability at target");
    return -std::log(q);
}

struct MlpTrainConfig {
    double learning_rate = 0.1;
    int epochs = 3000;
    double validation_fraction = 0.4;
    int batch_size = 0;  // 0 = full batch
    uint64_t seed = 1;
};

struct LearningCurves {
    std::vector<double> train_loss;  // one entry per epoch
    std::vector<double> val_loss;
};

namespace detail {

// Seeded stratified split: within each label, a derived shuffle sends the
// first val_fraction of indices to validation.
inline void stratified_split(const std::vector<int>& labels, double val_fraction, uint64_t seed,
                             std::vector<int>& train_idx, std::vector<int>& val_idx) {
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<int>> byl(max_label + 1);
    for (size_t i = 0; i < labels.size(); ++i) byl[labels[i]].push_back(static_cast<int>(i));
    Rng master(seed);
    for (size_t l = 0; l < byl.size(); ++l) {
        auto& idx = byl[l];
        if (idx.empty()) continue;
        Rng r = master.derive(l);
        for (size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[r.index(i + 1)]);
        size_t nval = static_cast<size_t>(std::lround(val_fraction * idx.size()));
        for (size_t i = 0; i < idx.size(); ++i)
            (i < nval ? val_idx : train_idx).push_back(idx[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
}

inline double mean_loss(const MlpParams& p, const MatrixXd& X, const std::vector<int>& labels,
                        const std::vector<int>& idx) {
    if (idx.empty()) return 0;
    double acc = 0;
    const int chunk = 4096;
    MatrixXd Xc;
    for (size_t lo = 0; lo < idx.size(); lo += chunk) {
        size_t hi = std::min(idx.size(), lo + chunk);
        Xc.resize(hi - lo, X.cols());
        for (size_t r = lo; r < hi; ++r) Xc.row(r - lo) = X.row(idx[r]);
        MatrixXd P = forward_batch(p, Xc);
        for (size_t r = lo; r < hi; ++r) acc += -std::log(std::max(P(r - lo, labels[idx[r]]), 1e-300));
    }
    return acc / idx.size();
}

}  // namespace detail

// Gradient-descent training; records mean train loss (over the epoch's
// batches, computed pre-update) and validation loss per epoch.
inline LearningCurves train_classifier(MlpParams& p, const MatrixXd& X,
                                       const std::vector<int>& labels,
                                       const MlpTrainConfig& cfg) {
    if (X.rows() == 0) throw std::invalid_argument("empty training set");
    if (static_cast<size_t>(X.rows()) != labels.size())
        throw std::invalid_argument("labels/rows mismatch");
    std::vector<int> train_idx, val_idx;
    detail::stratified_split(labels, cfg.validation_fraction, cfg.seed, train_idx, val_idx);
    if (train_idx.empty()) throw std::invalid_argument("validation fraction leaves no training data");

    Rng rng(Rng(cfg.seed).derive(0x6d6c70).seed());
    LearningCurves curves;
    const int n = static_cast<int>(train_idx.size());
    const int bs = cfg.batch_size > 0 ? std::min(cfg.batch_size, n) : n;
    std::vector<int> order = train_idx;
    MatrixXd Xb(bs, X.cols());
    MatrixXd onehot(bs, p.n_out());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
        double epoch_loss = 0;
        int seen = 0;
        for (int lo = 0; lo + bs <= n; lo += bs) {
            for (int r = 0; r < bs; ++r) Xb.row(r) = X.row(order[lo + r]);
            MatrixXd H = ((Xb * p.W1).rowwise() + p.b1.transpose()).array().tanh();
            MatrixXd P = detail::softmax_rows((H * p.W2).rowwise() + p.b2.transpose());
            onehot.setZero();
            for (int r = 0; r < bs; ++r) {
                int t = labels[order[lo + r]];
                onehot(r, t) = 1.0;
                epoch_loss += -std::log(std::max(P(r, t), 1e-300));
            }
            seen += bs;
            MatrixXd dZ2 = (P - onehot) / bs;
            MatrixXd dH = dZ2 * p.W2.transpose();
            MatrixXd dZ1 = dH.array() * (1.0 - H.array().square());
            p.W2 -= cfg.learning_rate * (H.transpose() * dZ2);
            p.b2 -= cfg.learning_rate * dZ2.colwise().sum().transpose();
            p.W1 -= cfg.learning_rate * (Xb.transpose() * dZ1);
            p.b1 -= cfg.learning_rate * dZ1.colwise().sum().transpose();
        }
        curves.train_loss.push_back(seen ? epoch_loss / seen : 0.0);
        curves.val_loss.push_back(detail::mean_loss(p, X, labels, val_idx));
    }
    return curves;
}

inline double measure_temperature(const MlpParams& p, const VectorXd& config,
                                  const TempBins& bins) {
    VectorXd probs = forward(p, config);
    int best;
    probs.maxCoeff(&best);
    return bins.temperatures[best];
}

// Bin-wise mean of forward outputs over the ensemble rows.
inline VectorXd measure_ensemble(const MlpParams& p, const MatrixXd& X) {
    VectorXd acc = VectorXd::Zero(p.n_out());
    const int chunk = 4096;
    for (int lo = 0; lo < X.rows(); lo += chunk) {
        int hi = std::min<int>(X.rows(), lo + chunk);
        acc += forward_batch(p, X.middleRows(lo, hi - lo)).colwise().sum().transpose();
    }
    return acc / X.rows();
}

inline double ensemble_temperature(const MlpParams& p, const MatrixXd& X, const TempBins& bins) {
    VectorXd mean = measure_ensemble(p, X);
    int best;
    mean.maxCoeff(&best);
    return bins.temperatures[best];
}

// MLP1 checkpoint: magic, version u16, dims u32 x3, seed u64, then W1, b1,
// W2, b2 as little-endian f64 (row-major matrices).
inline std::string serialize_mlp(const MlpParams& p, uint64_t seed) {
    std::string out = "MLP1";
    put_le<uint16_t>(out, 1);
    put_le<uint32_t>(out, static_cast<uint32_t>(p.n_in()));
    put_le<uint32_t>(out, static_cast<uint32_t>(p.n_hidden()));
    put_le<uint32_t>(out, static_cast<uint32_t>(p.n_out()));
    put_le<uint64_t>(out, seed);
    auto put_mat = [&](const MatrixXd& M) {
        for (int i = 0; i < M.rows(); ++i)
            for (int j = 0; j < M.cols(); ++j) put_le<double>(out, M(i, j));
    };
    put_mat(p.W1);
    for (int i = 0; i < p.b1.size(); ++i) put_le<double>(out, p.b1[i]);
    put_mat(p.W2);
    for (int i = 0; i < p.b2.size(); ++i) put_le<double>(out, p.b2[i]);
    return out;
}

inline MlpParams deserialize_mlp(const std::string& in, uint64_t* seed = nullptr) {
    size_t pos = 0;
    if (in.size() < 4 || in.compare(0, 4, "MLP1") != 0) throw IoError("bad magic: expected MLP1");
    pos = 4;
    uint16_t version = get_le<uint16_t>(in, pos);
    if (version != 1) throw IoError("unsupported MLP1 version");
    uint32_t nin = get_le<uint32_t>(in, pos);
    uint32_t nhid = get_le<uint32_t>(in, pos);
    uint32_t nout = get_le<uint32_t>(in, pos);
    uint64_t sd = get_le<uint64_t>(in, pos);
    if (seed) *seed = sd;
    MlpParams p;
    p.W1.resize(nin, nhid);
    for (uint32_t i = 0; i < nin; ++i)
        for (uint32_t j = 0; j < nhid; ++j) p.W1(i, j) = get_le<double>(in, pos);
    p.b1.resize(nhid);
    for (uint32_t i = 0; i < nhid; ++i) p.b1[i] = get_le<double>(in, pos);
    p.W2.resize(nhid, nout);
    for (uint32_t i = 0; i < nhid; ++i)
        for (uint32_t j = 0; j < nout; ++j) p.W2(i, j) = get_le<double>(in, pos);
    p.b2.resize(nout);
    for (uint32_t i = 0; i < nout; ++i) p.b2[i] = get_le<double>(in, pos);
    return p;
}

inline void save_mlp(const MlpParams& p, uint64_t seed, const std::string& path) {
    atomic_write_file(path, serialize_mlp(p, seed));
}

inline MlpParams load_mlp(const std::string& path, uint64_t* seed = nullptr) {
    return deserialize_mlp(read_file(path), seed);
}

}  // namespace rgml
