#pragma once

// Correlation measurements and scaling-dimension fits.
//
// Fields: s = sigma - sigma_bar and eps = s * (4-neighbor sum of s) - eps_bar,
// with sigma_bar and eps_bar ensemble-wide scalars (per-config centering
// would force the correlator to zero at large r on small lattices).
//
// two_point_function groups site pairs by exact minimal-image Euclidean
// distance (no binning). patch_two_point instead averages into unit-width
// integer shells k = round(r) for k = 1 .. L/2-1: weight maps mix axis and
// diagonal pairs whose exact distances interleave, and exact-distance
// profiles of blocky maps zigzag even when the shell trend is clean.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rgml/dataset.hpp"
#include "rgml/fitkit.hpp"
#include "rgml/rng.hpp"

namespace rgml {

using Eigen::MatrixXd;

struct ProfileEntry {
    double r = 0;
    double value = 0;
    long long pair_count = 0;  // site pairs x samples contributing
};

struct CorrelationProfile {
    std::vector<ProfileEntry> entries;  // distances strictly increasing
};

enum class FieldKind { spin, epsilon };

inline double ensemble_sigma_bar(const Ensemble& e) {
    if (e.empty()) throw std::invalid_argument("empty ensemble");
    double acc = 0;
    const int n = e.n_sites();
    for (size_t s = 0; s < e.size(); ++s)
        for (int i = 0; i < n; ++i) acc += e.at(s, i);
    return acc / (e.size() * n);
}

inline std::vector<double> spin_field(const SpinConfig& c, double sigma_bar) {
    std::vector<double> out(c.values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = c.values[i] - sigma_bar;
    return out;
}

// Uncentered energy-like term s * (sum of 4 periodic neighbors of s).
inline std::vector<double> epsilon_raw(const std::vector<double>& s, int L) {
    std::vector<double> out(s.size());
    for (int i = 0; i < L; ++i) {
        int ip = (i + 1) % L, im = (i - 1 + L) % L;
        for (int j = 0; j < L; ++j) {
            int jp = (j + 1) % L, jm = (j - 1 + L) % L;
            out[i * L + j] = s[i * L + j] *
                             (s[ip * L + j] + s[im * L + j] + s[i * L + jp] + s[i * L + jm]);
        }
    }
    return out;
}

inline std::vector<double> epsilon_field(const SpinConfig& c, double sigma_bar, double eps_bar) {
    std::vector<double> s = spin_field(c, sigma_bar);
    std::vector<double> e = epsilon_raw(s, c.L);
    for (auto& x : e) x -= eps_bar;
    return e;
}

namespace detail {

// Unordered site pairs grouped by squared minimal-image distance.
struct PairClasses {
    std::vector<double> r;                       // sqrt(d2), ascending
    std::vector<long long> count;                // pairs per class
    std::vector<std::pair<int, int>> pairs;      // all (i<j), class-sorted
    std::vector<int> offset;                     // class c spans [offset[c], offset[c+1])
};

inline PairClasses pair_classes(int L) {
    const int n = L * L;
    std::map<int, std::vector<std::pair<int, int>>> byd2;
    for (int a = 0; a < n; ++a) {
        int ai = a / L, aj = a % L;
        for (int b = a + 1; b < n; ++b) {
            int bi = b / L, bj = b % L;
            int dx = std::abs(ai - bi);
            dx = std::min(dx, L - dx);
            int dy = std::abs(aj - bj);
            dy = std::min(dy, L - dy);
            byd2[dx * dx + dy * dy].push_back({a, b});
        }
    }
    PairClasses pc;
    pc.offset.push_back(0);
    for (auto& [d2, v] : byd2) {
        pc.r.push_back(std::sqrt(static_cast<double>(d2)));
        pc.count.push_back(static_cast<long long>(v.size()));
        pc.pairs.insert(pc.pairs.end(), v.begin(), v.end());
        pc.offset.push_back(static_cast<int>(pc.pairs.size()));
    }
    return pc;
}

// G += F^T F accumulated over row chunks of the (possibly huge) ensemble.
template <class RowFiller>
inline Eigen::MatrixXd accumulate_gram(size_t n_samples, int n_sites, RowFiller fill) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n_sites, n_sites);
    const size_t chunk = std::max<size_t>(1, (1u << 22) / std::max(1, n_sites));
    Eigen::MatrixXd F;
    for (size_t lo = 0; lo < n_samples; lo += chunk) {
        size_t hi = std::min(n_samples, lo + chunk);
        F.resize(hi - lo, n_sites);
        for (size_t s = lo; s < hi; ++s) fill(s, F.row(s - lo));
        G.selfadjointView<Eigen::Lower>().rankUpdate(F.transpose(), 1.0);
    }
    return G;
}

}  // namespace detail

inline CorrelationProfile two_point_function(const Ensemble& e, FieldKind kind) {
    if (e.empty()) throw std::invalid_argument("empty ensemble");
    const int L = e.side(), n = e.n_sites();
    const double sigma_bar = ensemble_sigma_bar(e);

    double eps_bar = 0;
    if (kind == FieldKind::epsilon) {
        std::vector<double> s(n);
        for (size_t k = 0; k < e.size(); ++k) {
            for (int i = 0; i < n; ++i) s[i] = e.at(k, i) - sigma_bar;
            std::vector<double> raw = epsilon_raw(s, L);
            eps_bar += std::accumulate(raw.begin(), raw.end(), 0.0);
        }
        eps_bar /= (e.size() * n);
    }

    std::vector<double> s(n);
    Eigen::MatrixXd G = detail::accumulate_gram(e.size(), n, [&](size_t k, auto row) {
        for (int i = 0; i < n; ++i) s[i] = e.at(k, i) - sigma_bar;
        if (kind == FieldKind::spin) {
            for (int i = 0; i < n; ++i) row[i] = s[i];
        } else {
            std::vector<double> raw = epsilon_raw(s, L);
            for (int i = 0; i < n; ++i) row[i] = raw[i] - eps_bar;
        }
    });

    detail::PairClasses pc = detail::pair_classes(L);
    CorrelationProfile prof;
    prof.entries.reserve(pc.r.size());
    for (size_t c = 0; c < pc.r.size(); ++c) {
        double acc = 0;
        for (int k = pc.offset[c]; k < pc.offset[c + 1]; ++k) {
            auto [a, b] = pc.pairs[k];
            acc += G(b, a);  // lower triangle holds the accumulated products
        }
        ProfileEntry entry;
        entry.r = pc.r[c];
        entry.value = acc / (static_cast<double>(pc.count[c]) * e.size());
        entry.pair_count = pc.count[c] * static_cast<long long>(e.size());
        prof.entries.push_back(entry);
    }
    return prof;
}

struct PowerLawFit {
    double amplitude = 0;  // B
    double exponent = 0;   // Delta in C = B r^(-2 Delta), or Delta_m for magnetization
    double se_amplitude = 0;
    double se_exponent = 0;
    double ci_amplitude_low = 0, ci_amplitude_high = 0;
    double ci_exponent_low = 0, ci_exponent_high = 0;
    double r_min = 0, r_max = 0;
    double residual_norm = 0;
    int n_points = 0;
};

// Default fit window [1, L/2] minus the largest 10% of the distances inside
// it (rounded up), where periodic wraparound flattens the profile.
inline std::pair<double, double> default_fit_range(const CorrelationProfile& prof, int L) {
    std::vector<double> rs;
    for (const auto& en : prof.entries)
        if (en.r >= 1.0 && en.r <= L / 2.0) rs.push_back(en.r);
    if (rs.size() < 3) throw FitError("profile too short for default fit range");
    size_t drop = static_cast<size_t>(std::ceil(0.1 * rs.size()));
    size_t keep = rs.size() - drop;
    if (keep < 3) keep = 3;
    return {1.0, rs[keep - 1]};
}

inline PowerLawFit fit_power_law(const CorrelationProfile& prof, double r_min, double r_max) {
    std::vector<double> xs, ys;
    for (const auto& en : prof.entries) {
        if (en.r >= r_min && en.r <= r_max) {
            xs.push_back(en.r);
            ys.push_back(en.value);
        }
    }
    if (xs.size() < 3) throw FitError("need at least 3 profile points in fit range");

    FitModel model = [](const Eigen::VectorXd& p, double r) {
        return p[0] * std::pow(r, -2.0 * p[1]);
    };
    FitJacobian jac = [](const Eigen::VectorXd& p, double r) {
        double f = std::pow(r, -2.0 * p[1]);
        Eigen::VectorXd row(2);
        row[0] = f;
        row[1] = -2.0 * p[0] * std::log(r) * f;
        return row;
    };
    Eigen::VectorXd p0(2);
    p0[0] = ys[0] != 0 ? ys[0] : 1.0;
    p0[1] = 0.5;
    FitResult res = least_squares_fit(model, xs, ys, p0, jac);

    PowerLawFit fit;
    fit.amplitude = res.params[0];
    fit.exponent = res.params[1];
    fit.se_amplitude = std::sqrt(std::max(0.0, res.covariance(0, 0)));
    fit.se_exponent = std::sqrt(std::max(0.0, res.covariance(1, 1)));
    double dof = std::max<size_t>(1, xs.size() - 2);
    auto [bl, bh] = t_confidence_interval(fit.amplitude, fit.se_amplitude, dof);
    auto [el, eh] = t_confidence_interval(fit.exponent, fit.se_exponent, dof);
    fit.ci_amplitude_low = bl;
    fit.ci_amplitude_high = bh;
    fit.ci_exponent_low = el;
    fit.ci_exponent_high = eh;
    fit.r_min = r_min;
    fit.r_max = r_max;
    fit.residual_norm = res.residual_norm;
    fit.n_points = static_cast<int>(xs.size());
    return fit;
}

// m(T) = (A/Tc) |T - Tc|^Delta_m near Tc; amplitude field holds A/Tc.
inline PowerLawFit fit_magnetization(const std::vector<std::pair<double, double>>& points,
                                     double Tc) {
    if (points.size() < 3) throw FitError("need at least 3 (T, m) points");
    std::vector<double> xs, ys;
    for (auto [T, m] : points) {
        xs.push_back(std::abs(T - Tc));
        ys.push_back(m);
    }
    FitModel model = [](const Eigen::VectorXd& p, double dt) {
        return p[0] * std::pow(dt, p[1]);
    };
    FitJacobian jac = [](const Eigen::VectorXd& p, double dt) {
        double f = std::pow(dt, p[1]);
        Eigen::VectorXd row(2);
        row[0] = f;
        row[1] = p[0] * std::log(dt) * f;
        return row;
    };
    Eigen::VectorXd p0(2);
    size_t far = 0;
    for (size_t i = 1; i < xs.size(); ++i)
        if (xs[i] > xs[far]) far = i;
    p0[1] = 0.125;
    p0[0] = ys[far] / std::pow(xs[far], p0[1]);
    FitResult res = least_squares_fit(model, xs, ys, p0, jac);

    PowerLawFit fit;
    fit.amplitude = res.params[0];
    fit.exponent = res.params[1];
    fit.se_amplitude = std::sqrt(std::max(0.0, res.covariance(0, 0)));
    fit.se_exponent = std::sqrt(std::max(0.0, res.covariance(1, 1)));
    double dof = std::max<size_t>(1, xs.size() - 2);
    auto [al, ah] = t_confidence_interval(fit.amplitude, fit.se_amplitude, dof);
    auto [el, eh] = t_confidence_interval(fit.exponent, fit.se_exponent, dof);
    fit.ci_amplitude_low = al;
    fit.ci_amplitude_high = ah;
    fit.ci_exponent_low = el;
    fit.ci_exponent_high = eh;
    fit.r_min = *std::min_element(xs.begin(), xs.end());
    fit.r_max = *std::max_element(xs.begin(), xs.end());
    fit.residual_norm = res.residual_norm;
    fit.n_points = static_cast<int>(xs.size());
    return fit;
}

// One grid of <v_i h_a> per hidden unit, laid out on the visible lattice.
struct VhCorrelationMap {
    int side = 0;                       // visible lattice side L_v
    std::vector<Eigen::VectorXd> maps;  // N_h entries, each of length L_v^2
};

inline VhCorrelationMap vh_correlator(const MatrixXd& visible, const MatrixXd& hidden,
                                      int visible_side) {
    if (visible.rows() != hidden.rows()) throw std::invalid_argument("sample count mismatch");
    if (visible.cols() != visible_side * visible_side)
        throw std::invalid_argument("visible side mismatch");
    MatrixXd C = visible.transpose() * hidden / visible.rows();  // N_v x N_h
    VhCorrelationMap map;
    map.side = visible_side;
    map.maps.reserve(C.cols());
    for (int a = 0; a < C.cols(); ++a) map.maps.push_back(C.col(a));
    return map;
}

inline VhCorrelationMap vh_correlator(const Ensemble& visible, const Ensemble& hidden) {
    if (visible.size() != hidden.size()) throw std::invalid_argument("sample count mismatch");
    MatrixXd V(visible.size(), visible.n_sites());
    MatrixXd H(hidden.size(), hidden.n_sites());
    for (size_t s = 0; s < visible.size(); ++s) {
        for (int i = 0; i < visible.n_sites(); ++i) V(s, i) = visible.at(s, i);
        for (int i = 0; i < hidden.n_sites(); ++i) H(s, i) = hidden.at(s, i);
    }
    return vh_correlator(V, H, visible.side());
}

// <x_i x_j> = (1/N_h) sum_a map_a[i] map_a[j], shell-averaged over
// k = round(minimal-image distance), k = 1 .. L/2-1.
inline CorrelationProfile patch_two_point(const VhCorrelationMap& map) {
    const int L = map.side, n = L * L;
    const int n_shells = L / 2 - 1;
    if (n_shells < 1) throw std::invalid_argument("map side too small for shells");
    std::vector<double> acc(n_shells + 1, 0.0);
    std::vector<long long> cnt(n_shells + 1, 0);

    MatrixXd M(n, static_cast<int>(map.maps.size()));
    for (size_t a = 0; a < map.maps.size(); ++a) M.col(a) = map.maps[a];
    MatrixXd X = M * M.transpose() / static_cast<double>(map.maps.size());

    for (int a = 0; a < n; ++a) {
        int ai = a / L, aj = a % L;
        for (int b = a + 1; b < n; ++b) {
            int bi = b / L, bj = b % L;
            int dx = std::abs(ai - bi);
            dx = std::min(dx, L - dx);
            int dy = std::abs(aj - bj);
            dy = std::min(dy, L - dy);
            int k = static_cast<int>(std::lround(std::sqrt(double(dx * dx + dy * dy))));
            if (k < 1 || k > n_shells) continue;
            acc[k] += X(a, b);
            cnt[k] += 1;
        }
    }
    CorrelationProfile prof;
    for (int k = 1; k <= n_shells; ++k) {
        if (!cnt[k]) continue;
        prof.entries.push_back({static_cast<double>(k), acc[k] / cnt[k], cnt[k]});
    }
    return prof;
}

enum class SyntheticKind { white_noise, checkerboard };

// Single-grid synthetic control map on the visible lattice.
inline VhCorrelationMap synthetic_map(SyntheticKind kind, int L, int block_size, uint64_t seed) {
    VhCorrelationMap map;
    map.side = L;
    Eigen::VectorXd grid(L * L);
    if (kind == SyntheticKind::checkerboard) {
        if (block_size <= 0 || L % block_size != 0)
            throw std::invalid_argument("block size must divide L");
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < L; ++j)
                grid[i * L + j] = ((i / block_size + j / block_size) % 2 == 0) ? 1.0 : -1.0;
    } else {
        Rng rng(seed);
        for (int i = 0; i < L * L; ++i) grid[i] = rng.uniform(-1.0, 1.0);
    }
    map.maps.push_back(grid);
    return map;
}

// Spearman rank correlation between distance and value over the profile.
inline double spearman_rank_correlation(const CorrelationProfile& prof) {
    const size_t n = prof.entries.size();
    if (n < 3) throw std::invalid_argument("profile too short for rank correlation");
    auto midranks = [&](auto key) {
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), size_t(0));
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return key(a) < key(b); });
        std::vector<double> rank(n);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && key(idx[j + 1]) == key(idx[i])) ++j;
            double mid = (i + j) / 2.0 + 1.0;
            for (size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
            i = j + 1;
        }
        return rank;
    };
    std::vector<double> rr = midranks([&](size_t k) { return prof.entries[k].r; });
    std::vector<double> rv = midranks([&](size_t k) { return prof.entries[k].value; });
    double mr = 0, mv = 0;
    for (size_t k = 0; k < n; ++k) { mr += rr[k]; mv += rv[k]; }
    mr /= n;
    mv /= n;
    double num = 0, dr = 0, dv = 0;
    for (size_t k = 0; k < n; ++k) {
        num += (rr[k] - mr) * (rv[k] - mv);
        dr += (rr[k] - mr) * (rr[k] - mr);
        dv += (rv[k] - mv) * (rv[k] - mv);
    }
    if (dr == 0 || dv == 0) return 0;
    return num / std::sqrt(dr * dv);
}

// CSV writers shared by the CLI and experiment pipelines.
inline std::string profile_to_csv(const CorrelationProfile& prof) {
    std::string out = "r,C,count\n";
    for (const auto& en : prof.entries)
        out += fmt_double(en.r) + "," + fmt_double(en.value) + "," +
               std::to_string(en.pair_count) + "\n";
    return out;
}

inline std::string fit_to_csv(const PowerLawFit& fit) {
    std::string out = "param,estimate,se,ci_low,ci_high\n";
    out += "amplitude," + fmt_double(fit.amplitude) + "," + fmt_double(fit.se_amplitude) + "," +
           fmt_double(fit.ci_amplitude_low) + "," + fmt_double(fit.ci_amplitude_high) + "\n";
    out += "exponent," + fmt_double(fit.exponent) + "," + fmt_double(fit.se_exponent) + "," +
           fmt_double(fit.ci_exponent_low) + "," + fmt_double(fit.ci_exponent_high) + "\n";
    return out;
}

}  // namespace rgml
