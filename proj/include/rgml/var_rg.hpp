#pragma once

// Exact-enumeration checks of the variational-RG / RBM correspondence.
// Given RBM parameters and a visible Hamiltonian H(v), the coupling operator
// is T(v,h) = -E(v,h) + H(v). The induced coarse Hamiltonian is
//   H_rg(h) = -ln sum_v exp(T(v,h) - H(v)) = -ln sum_v exp(-E(v,h)),
// and the transformation is exact when sum_h exp(T(v,h)) = 1 for every v.
// Everything here tabulates over full state spaces (N_v + N_h <= 20).

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rgml/rbm_exact.hpp"

namespace rgml {

// Energy table over masks for a fixed number of +-1 sites.
struct HamiltonianTable {
    int n = 0;
    std::vector<double> energy;  // indexed by mask, size 2^n

    double operator()(uint32_t mask) const { return energy[mask]; }
};

struct ExactDistribution {
    int n = 0;
    std::vector<double> prob;  // indexed by mask, sums to 1

    static ExactDistribution from_hamiltonian(const HamiltonianTable& H) {
        ExactDistribution d;
        d.n = H.n;
        std::vector<double> terms(H.energy.size());
        for (size_t m = 0; m < H.energy.size(); ++m) terms[m] = -H.energy[m];
        double lz = detail::logsumexp(terms);
        d.prob.resize(H.energy.size());
        for (size_t m = 0; m < H.energy.size(); ++m) d.prob[m] = std::exp(-H.energy[m] - lz);
        return d;
    }
};

// T(v,h) tabulated with joint index (v_mask << N_h) | h_mask.
struct JointTable {
    int nv = 0, nh = 0;
    std::vector<double> value;

    double at(uint32_t vm, uint32_t hm) const { return value[(size_t(vm) << nh) | hm]; }
};

inline JointTable t_operator(const RbmParams& p, const HamiltonianTable& H_visible) {
    detail::check_enumerable(p.n_visible(), p.n_hidden(), 20);
    if (H_visible.n != p.n_visible())
        throw std::invalid_argument("visible Hamiltonian size mismatch");
    JointTable T;
    T.nv = p.n_visible();
    T.nh = p.n_hidden();
    T.value.resize(size_t(1) << (T.nv + T.nh));
    for (uint32_t vm = 0; vm < (1u << T.nv); ++vm) {
        VectorXd v = mask_to_pm1(vm, T.nv);
        for (uint32_t hm = 0; hm < (1u << T.nh); ++hm) {
            VectorXd h = mask_to_pm1(hm, T.nh);
            T.value[(size_t(vm) << T.nh) | hm] = -rbm_energy(p, v, h) + H_visible.energy[vm];
        }
    }
    return T;
}

// H_rg(h) from the traced expression exp(-H_rg)/Z_rg ~ tr_v exp(T - H):
// computed as -ln sum_v exp(T(v,h) - H(v)), which the identity chain equates
// with the RBM hidden-marginal Hamiltonian hidden_free_energy().
inline HamiltonianTable rg_hamiltonian_exact(const RbmParams& p,
                                             const HamiltonianTable& H_visible) {
    JointTable T = t_operator(p, H_visible);
    HamiltonianTable out;
    out.n = T.nh;
    out.energy.resize(size_t(1) << T.nh);
    std::vector<double> terms(size_t(1) << T.nv);
    for (uint32_t hm = 0; hm < (1u << T.nh); ++hm) {
        for (uint32_t vm = 0; vm < (1u << T.nv); ++vm)
            terms[vm] = T.at(vm, hm) - H_visible.energy[vm];
        out.energy[hm] = -detail::logsumexp(terms);
    }
    return out;
}

// max_v | ln sum_h exp(T(v,h)) |; zero iff the RBM visible marginal equals
// exp(-H(v)) without normalization correction.
inline double exactness_defect(const RbmParams& p, const HamiltonianTable& H_visible) {
    JointTable T = t_operator(p, H_visible);
    double worst = 0;
    std::vector<double> terms(size_t(1) << T.nh);
    for (uint32_t vm = 0; vm < (1u << T.nv); ++vm) {
        for (uint32_t hm = 0; hm < (1u << T.nh); ++hm) terms[hm] = T.at(vm, hm);
        worst = std::max(worst, std::abs(detail::logsumexp(terms)));
    }
    return worst;
}

// One-site instance with defect exactly zero for any weight W:
// N_v = N_h = 1, b_v = K, b_h = 0, H(v) = -K v - ln(2 cosh W), since
// sum_h exp(-E(v,h)) = exp(K v) 2 cosh(W v) = exp(-H(v)).
inline std::pair<RbmParams, HamiltonianTable> exact_one_site_instance(double K, double W) {
    RbmParams p;
    p.W = MatrixXd::Constant(1, 1, W);
    p.bv = VectorXd::Constant(1, K);
    p.bh = VectorXd::Zero(1);
    HamiltonianTable H;
    H.n = 1;
    H.energy = {+K - std::log(2 * std::cosh(W)),   // mask 0 -> v = -1
                -K - std::log(2 * std::cosh(W))};  // mask 1 -> v = +1
    return {p, H};
}

// Product distribution rho_h(h) rho_v(v) over the joint index; by
// construction hidden-visible covariances vanish.
inline ExactDistribution factorized_joint(const ExactDistribution& rho_v,
                                          const ExactDistribution& rho_h) {
    ExactDistribution out;
    out.n = rho_v.n + rho_h.n;
    out.prob.resize(size_t(1) << out.n);
    for (uint32_t vm = 0; vm < (1u << rho_v.n); ++vm)
        for (uint32_t hm = 0; hm < (1u << rho_h.n); ++hm)
            out.prob[(size_t(vm) << rho_h.n) | hm] = rho_v.prob[vm] * rho_h.prob[hm];
    return out;
}

// <v_j h_b> - <v_j><h_b> over a joint distribution indexed (v << nh) | h.
inline MatrixXd joint_vh_covariance(const std::vector<double>& joint, int nv, int nh) {
    MatrixXd cvh = MatrixXd::Zero(nv, nh);
    VectorXd ev = VectorXd::Zero(nv), eh = VectorXd::Zero(nh);
    for (uint32_t vm = 0; vm < (1u << nv); ++vm) {
        VectorXd v = mask_to_pm1(vm, nv);
        for (uint32_t hm = 0; hm < (1u << nh); ++hm) {
            double pr = joint[(size_t(vm) << nh) | hm];
            if (pr == 0) continue;
            VectorXd h = mask_to_pm1(hm, nh);
            cvh += pr * (v * h.transpose());
            ev += pr * v;
            eh += pr * h;
        }
    }
    return cvh - ev * eh.transpose();
}

}  // namespace rgml
