#include "semap/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace semap {

namespace {

struct Tracker {
    const ObjectiveFn& fn;
    int budget;
    int used = 0;
    Eigen::VectorXd best_x;
    double best_f = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_g;

    Tracker(const ObjectiveFn& f, int max_evals) : fn(f), budget(max_evals) {}

    bool exhausted() const { return used >= budget; }

    /// Evaluate f and grad at x; returns +inf (and a zero grad) for
    /// non-finite results so callers can back off.
    double eval(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        ++used;
        double f;
        try {
            f = fn(x, grad);
        } catch (...) {
            grad = Eigen::VectorXd::Zero(x.size());
            return std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(f) || !grad.allFinite()) {
            grad = Eigen::VectorXd::Zero(x.size());
            return std::numeric_limits<double>::infinity();
        }
        if (f < best_f) {
            best_f = f;
            best_x = x;
            best_g = grad;
        }
        return f;
    }
};

struct LinePoint {
    double t = 0.0;
    double f = 0.0;
    double df = 0.0;  // directional derivative along the search direction
};

/// Strong-Wolfe line search (bracket + zoom). Returns the accepted step in
/// `out` and true on success; on failure `out` holds the best finite point
/// tried (t may be 0 when nothing improved).
bool wolfe_search(Tracker& tr, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
                  const Eigen::VectorXd& dir, double c1, double c2, LinePoint& out,
                  Eigen::VectorXd& g_out) {
    const double df0 = g0.dot(dir);
    if (df0 >= 0.0) {
        return false;
    }

    auto eval_at = [&](double t, Eigen::VectorXd& g) {
        LinePoint p;
        p.t = t;
        p.f = tr.eval(x + t * dir, g);
        p.df = std::isfinite(p.f) ? g.dot(dir) : 0.0;
        return p;
    };

    LinePoint lo{0.0, f0, df0};
    Eigen::VectorXd g_lo = g0;
    LinePoint best{0.0, f0, df0};
    g_out = g0;

    double t = 1.0;
    double t_prev = 0.0;
    double f_prev = f0;
    constexpr double kMaxStep = 1e4;

    // Bracketing phase (Nocedal & Wright Alg. 3.5).
    LinePoint hi;
    Eigen::VectorXd g_hi;
    bool bracketed = false;
    for (int i = 0; i < 12 && !tr.exhausted(); ++i) {
        Eigen::VectorXd g;
        const LinePoint p = eval_at(t, g);
        if (!std::isfinite(p.f)) {
            t = 0.5 * (t_prev + t);  // shrink toward the last good step
            continue;
        }
        if (p.f < best.f) {
            best = p;
            g_out = g;
        }
        if (p.f > f0 + c1 * p.t * df0 || (i > 0 && p.f >= f_prev)) {
            hi = p;
            g_hi = g;
            bracketed = true;
            break;
        }
        if (std::abs(p.df) <= -c2 * df0) {
            out = p;
            g_out = g;
            return true;
        }
        if (p.df >= 0.0) {
            hi = lo;
            g_hi = g_lo;
            lo = p;
            g_lo = g;
            bracketed = true;
            break;
        }
        lo = p;
        g_lo = g;
        t_prev = p.t;
        f_prev = p.f;
        t = std::min(2.0 * p.t, kMaxStep);
        if (p.t >= kMaxStep) {
            break;
        }
    }
    if (!bracketed) {
        out = best;
        return false;
    }

    // Zoom phase (Alg. 3.6), bisection with a quadratic-interpolation trial.
    for (int i = 0; i < 20 && !tr.exhausted(); ++i) {
        double t_mid = 0.5 * (lo.t + hi.t);
        const double denom = 2.0 * (hi.f - lo.f - lo.df * (hi.t - lo.t));
        if (std::abs(denom) > 1e-30) {
            const double t_quad = lo.t - lo.df * (hi.t - lo.t) * (hi.t - lo.t) / denom;
            const double span = std::abs(hi.t - lo.t);
            if (std::isfinite(t_quad) && t_quad > std::min(lo.t, hi.t) + 0.1 * span &&
                t_quad < std::max(lo.t, hi.t) - 0.1 * span) {
                t_mid = t_quad;
            }
        }
        Eigen::VectorXd g;
        const LinePoint p = eval_at(t_mid, g);
        if (!std::isfinite(p.f)) {
            hi = LinePoint{t_mid, std::numeric_limits<double>::infinity(), 0.0};
            continue;
        }
        if (p.f < best.f) {
            best = p;
            g_out = g;
        }
        if (p.f > f0 + c1 * p.t * df0 || p.f >= lo.f) {
            hi = p;
            g_hi = g;
        } else {
            if (std::abs(p.df) <= -c2 * df0) {
                out = p;
                g_out = g;
                return true;
            }
            if (p.df * (hi.t - lo.t) >= 0.0) {
                hi = lo;
                g_hi = g_lo;
            }
            lo = p;
            g_lo = g;
        }
        if (std::abs(hi.t - lo.t) < 1e-14 * std::max(1.0, std::abs(lo.t))) {
            break;
        }
    }
    out = best;
    return best.f < f0 && best.t > 0.0;
}

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& fn, const Eigen::VectorXd& x0,
                           const LbfgsOptions& opts) {
    LbfgsResult res;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd g(x.size());

    Eigen::VectorXd g0(x.size());
    double f0;
    try {
        f0 = fn(x0, g0);
    } catch (...) {
        f0 = std::numeric_limits<double>::infinity();
        g0.setZero();
    }
    if (!std::isfinite(f0) || !g0.allFinite()) {
        f0 = std::numeric_limits<double>::infinity();
        g0.setZero();
    }

    Tracker tr(fn, opts.max_evals);
    tr.best_x = x0;
    tr.best_f = f0;
    tr.best_g = g0;

    auto finish = [&](bool converged) {
        res.x = tr.best_x;
        res.value = tr.best_f;
        res.gradient = tr.best_g;
        res.evaluations = tr.used;
        res.converged = converged;
        res.made_progress = tr.best_f < f0;
        return res;
    };

    if (opts.max_evals <= 0 || !std::isfinite(f0)) {
        return finish(false);
    }
    if (g0.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
        return finish(true);
    }

    double f = f0;
    g = g0;
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    while (!tr.exhausted()) {
        // Two-loop recursion for the search direction.
        Eigen::VectorXd q = g;
        const int m = static_cast<int>(s_hist.size());
        std::vector<double> alpha(static_cast<std::size_t>(m));
        for (int i = m - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (m > 0) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (int i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;
        if (dir.dot(g) >= 0.0) {
            dir = -g;  // fall back to steepest descent on a bad direction
        }

        LinePoint accepted;
        Eigen::VectorXd g_new;
        const bool ok = wolfe_search(tr, x, f, g, dir, opts.c1, opts.c2, accepted, g_new);
        if (!ok && accepted.t == 0.0) {
            break;  // no step improved the objective
        }
        const Eigen::VectorXd x_new = x + accepted.t * dir;
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        x = x_new;
        f = accepted.f;
        g = g_new;
        ++res.iterations;

        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            return finish(true);
        }
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        if (!ok) {
            break;  // Wolfe conditions unreachable; keep the best point
        }
    }
    return finish(false);
}

}  // namespace semap
