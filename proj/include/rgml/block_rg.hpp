#pragma once

// Block-spin renormalization step: disjoint 2x2 blocks replaced by their
// average, halving the lattice side per step. Output is real-valued in
// {-1, -1/2, 0, 1/2, 1} for binary input; binarization back to +-1 is a
// separate explicit step so correlator work can stay on the real values.

#include <stdexcept>
#include <vector>

#include "rgml/dataset.hpp"
#include "rgml/rng.hpp"

namespace rgml {

enum class ZeroPolicy { random_fair_coin, plus, minus };

inline SpinConfig block_average(const SpinConfig& c) {
    if (c.L % 2 != 0) throw std::invalid_argument("block_average needs even L");
    const int L = c.L, M = L / 2;
    SpinConfig out;
    out.L = M;
    out.kind = Kind::real;
    out.values.resize(static_cast<size_t>(M) * M);
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
            const double* v = c.values.data();
            double s = v[(2 * i) * L + 2 * j] + v[(2 * i) * L + 2 * j + 1] +
                       v[(2 * i + 1) * L + 2 * j] + v[(2 * i + 1) * L + 2 * j + 1];
            out.values[i * M + j] = s / 4.0;
        }
    }
    return out;
}

inline SpinConfig binarize(const SpinConfig& c, Rng& rng,
                           ZeroPolicy policy = ZeroPolicy::random_fair_coin) {
    SpinConfig out = c;
    out.kind = Kind::binary;
    for (auto& v : out.values) {
        if (v > 0) v = 1;
        else if (v < 0) v = -1;
        else {
            switch (policy) {
                case ZeroPolicy::plus: v = 1; break;
                case ZeroPolicy::minus: v = -1; break;
                case ZeroPolicy::random_fair_coin: v = rng.pm1(); break;
            }
        }
    }
    return out;
}

inline Ensemble binarize_ensemble(const Ensemble& e, Rng& rng,
                                  ZeroPolicy policy = ZeroPolicy::random_fair_coin) {
    Ensemble out(e.side(), Kind::binary, e.temperature(), e.seed());
    out.set_provenance(e.provenance(), e.provenance_step());
    out.reserve(e.size());
    for (size_t s = 0; s < e.size(); ++s) out.push_config(binarize(e.config(s), rng, policy));
    return out;
}

struct RgFlowTrace {
    std::vector<Ensemble> stages;  // stage 0 is the input; side halves per stage
};

inline RgFlowTrace rg_flow(const Ensemble& input, int steps, bool binarize_each_step = false,
                           ZeroPolicy policy = ZeroPolicy::random_fair_coin) {
    int L = input.side();
    for (int k = 0; k < steps; ++k) {
        if (L % 2 != 0)
            throw std::invalid_argument("lattice side not divisible by 2^steps");
        L /= 2;
    }
    RgFlowTrace trace;
    trace.stages.push_back(input);
    Rng rng(Rng(input.seed()).derive(0x7267666c).seed());  // stage tie-break stream
    for (int k = 1; k <= steps; ++k) {
        const Ensemble& prev = trace.stages.back();
        Kind kind = binarize_each_step ? Kind::binary : Kind::real;
        Ensemble stage(prev.side() / 2, kind, prev.temperature(), prev.seed());
        stage.set_provenance(Provenance::rg_step, k);
        stage.reserve(prev.size());
        for (size_t s = 0; s < prev.size(); ++s) {
            SpinConfig c = block_average(prev.config(s));
            if (binarize_each_step) c = binarize(c, rng, policy);
            stage.push_config(c);
        }
        trace.stages.push_back(std::move(stage));
    }
    return trace;
}

}  // namespace rgml
