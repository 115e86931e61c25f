#pragma once

// Nonlinear least squares via Levenberg-Marquardt damped Gauss-Newton, with
// parameter covariance s^2 (J^T J)^-1 and Student-t confidence intervals.
// Damping: lambda starts at 1e-3 on the normal-equations diagonal, x10 on a
// rejected step, /10 on an accepted one. Jacobian is central-difference by
// default; callers with cheap analytic derivatives pass them in.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace rgml {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// model(params, x) -> predicted y
using FitModel = std::function<double(const Eigen::VectorXd&, double)>;
// jacobian(params, x) -> d model / d params
using FitJacobian = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

struct FitOptions {
    int max_iterations = 200;
    double tolerance = 1e-12;  // relative step-size convergence
    double lambda0 = 1e-3;
};

struct FitResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;
    double residual_norm = 0;  // sqrt of the sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Eigen::VectorXd numeric_jacobian_row(const FitModel& model, const Eigen::VectorXd& p,
                                            double x) {
    Eigen::VectorXd row(p.size());
    for (int k = 0; k < p.size(); ++k) {
        double h = 1e-6 * (1.0 + std::abs(p[k]));
        Eigen::VectorXd pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        row[k] = (model(pp, x) - model(pm, x)) / (2 * h);
    }
    return row;
}

}  // namespace detail

inline FitResult least_squares_fit(const FitModel& model, const std::vector<double>& xs,
                                   const std::vector<double>& ys, const Eigen::VectorXd& p0,
                                   const FitJacobian& jac = nullptr,
                                   const FitOptions& opt = {}) {
    const int n = static_cast<int>(xs.size());
    const int np = static_cast<int>(p0.size());
    if (n < np + 1) throw FitError("need at least params+1 data points");

    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r[i] = ys[i] - model(p, xs[i]);
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd J(n, np);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd row = jac ? jac(p, xs[i]) : detail::numeric_jacobian_row(model, p, xs[i]);
            J.row(i) = -row.transpose();  // residual = y - model, so dr/dp = -dmodel/dp
        }
        return J;
    };

    Eigen::VectorXd p = p0;
    Eigen::VectorXd r = residuals(p);
    double cost = r.squaredNorm();
    double lambda = opt.lambda0;
    FitResult out;

    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        Eigen::MatrixXd J = jacobian(p);
        Eigen::MatrixXd H = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            Eigen::MatrixXd Hd = H;
            Hd.diagonal().array() += lambda;
            Eigen::LDLT<Eigen::MatrixXd> solver(Hd);
            if (solver.info() != Eigen::Success) {
                lambda *= 10;
                continue;
            }
            Eigen::VectorXd step = solver.solve(-g);
            if (!step.allFinite()) {
                lambda *= 10;
                continue;
            }
            Eigen::VectorXd pn = p + step;
            Eigen::VectorXd rn = residuals(pn);
            double cn = rn.squaredNorm();
            if (std::isfinite(cn) && cn <= cost) {
                double rel = step.norm() / (p.norm() + 1e-300);
                p = pn;
                r = rn;
                cost = cn;
                lambda = std::max(lambda / 10, 1e-15);
                accepted = true;
                if (rel < opt.tolerance) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10;
        }
        if (!accepted) {
            // No downhill step found at any damping: treat current point as
            // the optimum (flat or already converged).
            out.converged = true;
            break;
        }
        if (out.converged) break;
    }

    Eigen::MatrixXd J = jacobian(p);
    Eigen::MatrixXd H = J.transpose() * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
    if (!lu.isInvertible()) throw FitError("singular normal equations at optimum");
    double dof = std::max(1, n - np);
    double s2 = cost / dof;
    out.params = p;
    out.covariance = s2 * lu.inverse();
    out.residual_norm = std::sqrt(cost);
    out.iterations = it + 1;
    if (it >= opt.max_iterations && !out.converged)
        throw FitError("no convergence after max iterations");
    return out;
}

namespace detail {

// Regularized incomplete beta by Lentz continued fraction.
inline double betacf(double a, double b, double x) {
    const int maxit = 300;
    const double eps = 3e-16, fpmin = 1e-300;
    double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1, d = 1 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1 / d;
    double h = d;
    for (int m = 1; m <= maxit; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

inline double betainc(double a, double b, double x) {
    if (x <= 0) return 0;
    if (x >= 1) return 1;
    double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double front = std::exp(a * std::log(x) + b * std::log(1 - x) - lbeta);
    if (x < (a + 1) / (a + b + 2)) return front * betacf(a, b, x) / a;
    return 1 - std::exp(b * std::log(1 - x) + a * std::log(x) - lbeta) * betacf(b, a, 1 - x) / b;
}

}  // namespace detail

// Two-sided Student-t quantile: P(|T| <= t) = level.
inline double t_quantile(double dof, double level = 0.90) {
    if (dof < 1) throw std::domain_error("dof must be >= 1");
    double tail = 1 - level;  // total two-sided tail mass
    // CDF of |T|: F(t) = 1 - I_{dof/(dof+t^2)}(dof/2, 1/2). Bisection on t.
    auto two_tail = [&](double t) { return detail::betainc(dof / 2, 0.5, dof / (dof + t * t)); };
    double lo = 0, hi = 1;
    while (two_tail(hi) > tail) hi *= 2;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (two_tail(mid) > tail) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline std::pair<double, double> t_confidence_interval(double estimate, double standard_error,
                                                       double dof, double level = 0.90) {
    double t = t_quantile(dof, level);
    return {estimate - t * standard_error, estimate + t * standard_error};
}

}  // namespace rgml
