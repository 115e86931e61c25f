#pragma once

// Exact enumeration for small RBMs: partition function, marginals, KL to a
// given data distribution, and exact KL gradients. Everything sums over all
// 2^N_v visible states (closed form over hiddens), capped at N_v+N_h <= 24.
// Log-sum-exp throughout so large parameters cannot overflow.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rgml/rbm.hpp"

namespace rgml {

namespace detail {

inline double logsumexp(const std::vector<double>& xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline void check_enumerable(int n_visible, int n_hidden, int cap = 24) {
    if (n_visible + n_hidden > cap)
        throw std::invalid_argument("state space too large to enumerate");
}

}  // namespace detail

// Bit i of mask set -> component i equals +1, else -1.
inline VectorXd mask_to_pm1(uint32_t mask, int n) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = (mask >> i) & 1u ? 1.0 : -1.0;
    return v;
}

// F(v) with sum over hiddens done in closed form:
// exp(-F(v)) = sum_h exp(-E(v,h)) = exp(b_v.v) prod_a 2 cosh((W^T v + b_h)_a)
inline double visible_free_energy(const RbmParams& p, const VectorXd& v) {
    VectorXd t = p.W.transpose() * v + p.bh;
    double f = -p.bv.dot(v);
    for (int a = 0; a < t.size(); ++a) f -= std::log(2.0 * std::cosh(t[a]));
    return f;
}

// Same trace in the other direction; this is the hidden-marginal Hamiltonian
// -ln sum_v exp(-E(v,h)).
inline double hidden_free_energy(const RbmParams& p, const VectorXd& h) {
    VectorXd t = p.W * h + p.bv;
    double f = -p.bh.dot(h);
    for (int i = 0; i < t.size(); ++i) f -= std::log(2.0 * std::cosh(t[i]));
    return f;
}

inline double exact_log_z(const RbmParams& p) {
    detail::check_enumerable(p.n_visible(), p.n_hidden());
    const uint32_t n_states = 1u << p.n_visible();
    std::vector<double> terms(n_states);
    for (uint32_t m = 0; m < n_states; ++m)
        terms[m] = -visible_free_energy(p, mask_to_pm1(m, p.n_visible()));
    return detail::logsumexp(terms);
}

// p(v) over all visible masks.
inline std::vector<double> exact_visible_marginal(const RbmParams& p) {
    detail::check_enumerable(p.n_visible(), p.n_hidden());
    const uint32_t n_states = 1u << p.n_visible();
    double lz = exact_log_z(p);
    std::vector<double> out(n_states);
    for (uint32_t m = 0; m < n_states; ++m)
        out[m] = std::exp(-visible_free_energy(p, mask_to_pm1(m, p.n_visible())) - lz);
    return out;
}

struct ExactGradients {
    double kl = 0;
    MatrixXd dW;
    VectorXd dbv;
    VectorXd dbh;
};

// KL(q || p_model) and its exact parameter gradients. q is indexed by
// visible mask and must sum to 1.
inline ExactGradients exact_kl_and_gradient(const RbmParams& p, const std::vector<double>& q) {
    detail::check_enumerable(p.n_visible(), p.n_hidden());
    const int nv = p.n_visible(), nh = p.n_hidden();
    const uint32_t n_states = 1u << nv;
    if (q.size() != n_states) throw std::invalid_argument("q must cover all visible states");

    std::vector<double> model = exact_visible_marginal(p);
    ExactGradients g;
    g.dW = MatrixXd::Zero(nv, nh);
    g.dbv = VectorXd::Zero(nv);
    g.dbh = VectorXd::Zero(nh);

    MatrixXd mW = MatrixXd::Zero(nv, nh), dWd = MatrixXd::Zero(nv, nh);
    VectorXd mv = VectorXd::Zero(nv), dv = VectorXd::Zero(nv);
    VectorXd mh = VectorXd::Zero(nh), dh = VectorXd::Zero(nh);
    for (uint32_t m = 0; m < n_states; ++m) {
        VectorXd v = mask_to_pm1(m, nv);
        VectorXd t = hidden_expectation(p, v);
        mW += model[m] * (v * t.transpose());
        mv += model[m] * v;
        mh += model[m] * t;
        if (q[m] > 0) {
            dWd += q[m] * (v * t.transpose());
            dv += q[m] * v;
            dh += q[m] * t;
            g.kl += q[m] * (std::log(q[m]) - std::log(model[m]));
        }
    }
    g.dW = mW - dWd;
    g.dbv = mv - dv;
    g.dbh = mh - dh;
    return g;
}

// Enumerated joint p(v,h) indexed by (v_mask << N_h) | h_mask; test oracle.
inline std::vector<double> exact_joint(const RbmParams& p) {
    detail::check_enumerable(p.n_visible(), p.n_hidden(), 24);
    const int nv = p.n_visible(), nh = p.n_hidden();
    double lz = exact_log_z(p);
    std::vector<double> out(size_t(1) << (nv + nh));
    for (uint32_t vm = 0; vm < (1u << nv); ++vm) {
        VectorXd v = mask_to_pm1(vm, nv);
        for (uint32_t hm = 0; hm < (1u << nh); ++hm) {
            VectorXd h = mask_to_pm1(hm, nh);
            out[(size_t(vm) << nh) | hm] = std::exp(-rbm_energy(p, v, h) - lz);
        }
    }
    return out;
}

// Empirical distribution of +-1 rows as a vector over visible masks.
inline std::vector<double> empirical_distribution(const MatrixXd& rows) {
    const int nv = static_cast<int>(rows.cols());
    if (nv > 24) throw std::invalid_argument("state space too large to enumerate");
    std::vector<double> q(size_t(1) << nv, 0.0);
    for (int r = 0; r < rows.rows(); ++r) {
        uint32_t m = 0;
        for (int i = 0; i < nv; ++i)
            if (rows(r, i) > 0) m |= 1u << i;
        q[m] += 1.0;
    }
    for (auto& x : q) x /= rows.rows();
    return q;
}

}  // namespace rgml
