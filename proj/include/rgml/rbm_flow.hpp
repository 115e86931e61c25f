#pragma once

// RBM flow: iterate the trained network's reconstruction map v -> h -> v.
// One flow step is a single reconstruction; vector length is a constant of
// the flow. Expectation mode composes the tanh maps (deterministic);
// stochastic mode samples +-1 states from the conditionals.

#include <Eigen/Dense>
#include <vector>

#include "rgml/dataset.hpp"
#include "rgml/rbm.hpp"

namespace rgml {

inline VectorXd flow_step(const RbmParams& p, const VectorXd& v, Propagation mode, Rng& rng) {
    if (v.size() != p.W.rows()) throw std::invalid_argument("flow_step dimension mismatch");
    if (mode == Propagation::expectation)
        return visible_expectation(p, hidden_expectation(p, v));
    VectorXd h = sample_pm1(hidden_conditional(p, v), rng);
    return sample_pm1(visible_conditional(p, h), rng);
}

struct FlowTrace {
    std::vector<MatrixXd> stages;  // stage 0 = input; rows are configs
    Propagation mode = Propagation::expectation;
};

inline FlowTrace generate_flow(const RbmParams& p, const MatrixXd& initial, int n_steps,
                               Propagation mode, uint64_t seed) {
    FlowTrace trace;
    trace.mode = mode;
    trace.stages.reserve(n_steps + 1);
    trace.stages.push_back(initial);
    Rng master(seed);
    for (int k = 1; k <= n_steps; ++k) {
        const MatrixXd& prev = trace.stages.back();
        MatrixXd next(prev.rows(), prev.cols());
        Rng rng = master.derive(k);
        for (int r = 0; r < prev.rows(); ++r)
            next.row(r) = flow_step(p, prev.row(r).transpose(), mode, rng).transpose();
        trace.stages.push_back(std::move(next));
    }
    return trace;
}

// Flow stages as ensembles (real kind in expectation mode, binary in
// stochastic mode); side is the square root of the vector length.
inline Ensemble stage_to_ensemble(const MatrixXd& stage, int side, double T, uint64_t seed,
                                  Propagation mode, int step) {
    Ensemble e(side, mode == Propagation::expectation ? Kind::real : Kind::binary, T, seed);
    e.set_provenance(Provenance::rbm_flow, step);
    e.reserve(stage.rows());
    std::vector<double> row(stage.cols());
    std::vector<int8_t> brow(stage.cols());
    for (int r = 0; r < stage.rows(); ++r) {
        if (mode == Propagation::expectation) {
            for (int i = 0; i < stage.cols(); ++i) row[i] = stage(r, i);
            e.push_real(row.data());
        } else {
            for (int i = 0; i < stage.cols(); ++i) brow[i] = stage(r, i) > 0 ? 1 : -1;
            e.push_binary(brow.data());
        }
    }
    return e;
}

}  // namespace rgml
