#pragma once

// 2D Ising model on a periodic L x L lattice with single-spin-flip
// Metropolis dynamics. H = -J sum_<ij> s_i s_j, external field fixed to zero.
//
// A sweep is L^2 proposals at uniformly random sites; acceptance uses the
// standard min(1, exp(-beta dE)) rule with dE looked up from the five
// possible neighbor sums. One chain owns one Rng; multi-chain ensembles
// derive one child stream per chain and concatenate in chain order, so
// results do not depend on scheduling.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rgml/dataset.hpp"
#include "rgml/rng.hpp"

namespace rgml {

struct IsingModel {
    double coupling = 1.0;      // J
    double external_field = 0;  // fixed 0 for every in-scope experiment
};

struct McSchedule {
    int burn_in_sweeps = 1000;
    int thinning_sweeps = 10;
    int n_samples = 0;
};

inline double critical_temperature(double coupling) {
    if (coupling <= 0) throw std::domain_error("coupling must be positive");
    return 2.0 * coupling / std::log(1.0 + std::sqrt(2.0));
}

// Onsager spontaneous magnetization; 0 at and above Tc.
inline double onsager_magnetization(double T, double coupling = 1.0) {
    if (T >= critical_temperature(coupling)) return 0.0;
    double s = std::sinh(2.0 * coupling / T);
    return std::pow(1.0 - std::pow(s, -4.0), 0.125);
}

inline double ising_energy(const IsingModel& model, const SpinConfig& c) {
    if (c.kind != Kind::binary) throw std::invalid_argument("ising_energy needs a binary config");
    const int L = c.L;
    double sum = 0;
    for (int i = 0; i < L; ++i) {
        int ip = (i + 1) % L;
        for (int j = 0; j < L; ++j) {
            int jp = (j + 1) % L;
            double s = c.values[i * L + j];
            sum += s * c.values[ip * L + j];  // each bond counted once via
            sum += s * c.values[i * L + jp];  // right and down neighbors
        }
    }
    return -model.coupling * sum;
}

namespace detail {

// Neighbor index table: site -> {up, down, left, right} flat indices.
inline std::vector<int> neighbor_table(int L) {
    std::vector<int> nb(static_cast<size_t>(L) * L * 4);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            int s = i * L + j;
            nb[4 * s + 0] = ((i + 1) % L) * L + j;
            nb[4 * s + 1] = ((i - 1 + L) % L) * L + j;
            nb[4 * s + 2] = i * L + (j + 1) % L;
            nb[4 * s + 3] = i * L + (j - 1 + L) % L;
        }
    }
    return nb;
}

struct AcceptTable {
    // accept[m + 4] = min(1, exp(-2 beta J s nbsum)) indexed by m = s*nbsum.
    double p[9];
    AcceptTable(double beta, double J) {
        for (int m = -4; m <= 4; ++m)
            p[m + 4] = m <= 0 ? 1.0 : std::exp(-2.0 * beta * J * m);
    }
};

inline void sweep_raw(int8_t* s, int L, const std::vector<int>& nb, const AcceptTable& acc,
                      Rng& rng) {
    const int n = L * L;
    for (int step = 0; step < n; ++step) {
        int site = static_cast<int>(rng.index(n));
        const int* q = nb.data() + 4 * site;
        int m = s[site] * (s[q[0]] + s[q[1]] + s[q[2]] + s[q[3]]);
        double p = acc.p[m + 4];
        if (p >= 1.0 || rng.uniform() < p) s[site] = -s[site];
    }
}

}  // namespace detail

inline SpinConfig metropolis_sweep(const IsingModel& model, const SpinConfig& c, double beta,
                                   Rng& rng) {
    if (c.kind != Kind::binary) throw std::invalid_argument("metropolis_sweep needs binary config");
    if (beta < 0) throw std::domain_error("beta must be nonnegative");
    const int L = c.L;
    std::vector<int8_t> s(c.values.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = c.values[i] > 0 ? 1 : -1;
    auto nb = detail::neighbor_table(L);
    detail::AcceptTable acc(beta, model.coupling);
    detail::sweep_raw(s.data(), L, nb, acc, rng);
    SpinConfig out = c;
    for (size_t i = 0; i < s.size(); ++i) out.values[i] = s[i];
    return out;
}

// One chain: random init, burn in, then one sample per thinning interval.
inline Ensemble sample_ensemble(const IsingModel& model, int L, double T,
                                const McSchedule& sched, uint64_t seed) {
    if (T <= 0) throw std::domain_error("T must be positive (beta -> inf not sampled)");
    Ensemble out(L, Kind::binary, T, seed);
    if (sched.n_samples == 0) return out;
    Rng rng(seed);
    const int n = L * L;
    std::vector<int8_t> s(n);
    for (auto& x : s) x = rng.coin() ? 1 : -1;
    auto nb = detail::neighbor_table(L);
    detail::AcceptTable acc(1.0 / T, model.coupling);
    for (int k = 0; k < sched.burn_in_sweeps; ++k) detail::sweep_raw(s.data(), L, nb, acc, rng);
    out.reserve(sched.n_samples);
    for (int i = 0; i < sched.n_samples; ++i) {
        for (int k = 0; k < sched.thinning_sweeps; ++k)
            detail::sweep_raw(s.data(), L, nb, acc, rng);
        out.push_binary(s.data());
    }
    return out;
}

// Independent chains with derived seeds, concatenated in chain order.
// n_samples is the total across chains (rounded up to a multiple).
inline Ensemble sample_ensemble_chains(const IsingModel& model, int L, double T,
                                       const McSchedule& sched, uint64_t seed, int n_chains) {
    if (n_chains < 1) throw std::domain_error("need at least one chain");
    int per = (sched.n_samples + n_chains - 1) / n_chains;
    Ensemble out(L, Kind::binary, T, seed);
    out.reserve(static_cast<size_t>(per) * n_chains);
    Rng master(seed);
    McSchedule chain_sched = sched;
    chain_sched.n_samples = per;
    for (int c = 0; c < n_chains; ++c) {
        Ensemble e = sample_ensemble(model, L, T, chain_sched, master.derive(c).seed());
        out.append(e);
    }
    return out;
}

inline double magnetization(const SpinConfig& c) {
    double m = 0;
    for (double v : c.values) m += v;
    return m / c.values.size();
}

// Mean of |per-config magnetization|; absolute value keeps the two
// broken-symmetry branches from canceling below Tc.
inline double average_magnetization(const Ensemble& e) {
    if (e.empty()) throw std::invalid_argument("empty ensemble");
    const int n = e.n_sites();
    double acc = 0;
    for (size_t s = 0; s < e.size(); ++s) {
        double m = 0;
        for (int i = 0; i < n; ++i) m += e.at(s, i);
        acc += std::abs(m / n);
    }
    return acc / e.size();
}

}  // namespace rgml
