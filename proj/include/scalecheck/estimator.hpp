#ifndef SCALECHECK_ESTIMATOR_HPP
#define SCALECHECK_ESTIMATOR_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scalecheck/model.hpp"
#include "scalecheck/parameter_index.hpp"

namespace scalecheck {

/// A covariance matrix that must be positive definite is not.
class NotPositiveDefinite : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The optimizer failed to reach a stationary point.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sample covariance matrix (N-denominator) and sample size.
class SampleMoments {
public:
    SampleMoments(Eigen::MatrixXd s, std::size_t n) : s_(std::move(s)), n_(n) {
        if (s_.rows() != s_.cols() || s_.rows() == 0) throw std::invalid_argument("covariance matrix must be square");
        if (n_ < 2) throw std::invalid_argument("sample size must be at least 2");
        const double scale = s_.cwiseAbs().maxCoeff();
        if ((s_ - s_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1.0))
            throw std::invalid_argument("covariance matrix is not symmetric");
        s_ = 0.5 * (s_ + s_.transpose());
        Eigen::LLT<Eigen::MatrixXd> llt(s_);
        if (llt.info() != Eigen::Success) throw NotPositiveDefinite("sample covariance matrix is not positive definite");
        log_det_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }

    const Eigen::MatrixXd& s() const noexcept { return s_; }
    std::size_t n() const noexcept { return n_; }
    double log_det_s() const noexcept { return log_det_; }
    Eigen::Index dim() const noexcept { return s_.rows(); }

private:
    Eigen::MatrixXd s_;
    std::size_t n_;
    double log_det_ = 0.0;
};

struct ModelMatrices {
    Eigen::MatrixXd lambda;  // indicators x factors
    Eigen::MatrixXd phi;     // factors x factors
    Eigen::MatrixXd theta;   // indicators x indicators
};

struct ParameterEstimate {
    Eigen::MatrixXd lambda;
    Eigen::MatrixXd phi;
    Eigen::MatrixXd theta;
    double discrepancy = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    Eigen::VectorXd full;     // in parameter_layout() order
    Eigen::VectorXd reduced;  // free coordinates
};

/// Scatters a full parameter vector into Lambda, Phi, Theta.
inline ModelMatrices unpack(const ModelSpec& spec, const Eigen::VectorXd& full) {
    const auto p = static_cast<Eigen::Index>(spec.num_indicators());
    const auto m = static_cast<Eigen::Index>(spec.num_factors());
    ModelMatrices mm{Eigen::MatrixXd::Zero(p, m), Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(p, p)};
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i) mm.lambda(i, static_cast<Eigen::Index>(spec.factor_of(static_cast<std::size_t>(i)))) = full[k++];
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) mm.phi(a, b) = mm.phi(b, a) = full[k++];
    for (Eigen::Index i = 0; i < p; ++i) mm.theta(i, i) = full[k++];
    for (auto [i, j] : spec.residual_covariances()) {
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        mm.theta(ii, jj) = mm.theta(jj, ii) = full[k++];
    }
    return mm;
}

/// Lambda * Phi * Lambda' + Theta, symmetrized.
inline Eigen::MatrixXd model_implied_covariance(const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& phi,
                                                const Eigen::MatrixXd& theta) {
    Eigen::MatrixXd sigma = lambda * phi * lambda.transpose() + theta;
    return 0.5 * (sigma + sigma.transpose());
}

inline Eigen::MatrixXd model_implied_covariance(const ModelMatrices& m) {
    return model_implied_covariance(m.lambda, m.phi, m.theta);
}

inline Eigen::MatrixXd model_implied_covariance(const ParameterEstimate& e) {
    return model_implied_covariance(e.lambda, e.phi, e.theta);
}

/// ML fit function ln|Sigma| + tr(S Sigma^-1) - ln|S| - p. Throws
/// NotPositiveDefinite when Sigma has no Cholesky factor.
inline double ml_discrepancy(const SampleMoments& moments, const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != moments.dim() || sigma.cols() != moments.dim())
        throw std::invalid_argument("implied covariance dimension does not match sample covariance");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite("implied covariance matrix is not positive definite");
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double trace = llt.solve(moments.s()).trace();
    const double f = log_det + trace - moments.log_det_s() - static_cast<double>(moments.dim());
    // Rounding can push an exact fit a hair below zero.
    return f < 0.0 && f > -1e-12 ? 0.0 : f;
}

namespace detail {

struct Evaluation {
    double f = 0.0;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd sigma_inv;
};

inline bool evaluate(const SampleMoments& moments, const ModelSpec& spec, const Eigen::VectorXd& full,
                     Evaluation& out) {
    auto mm = unpack(spec, full);
    out.sigma = model_implied_covariance(mm);
    Eigen::LLT<Eigen::MatrixXd> llt(out.sigma);
    if (llt.info() != Eigen::Success) return false;
    const auto p = out.sigma.rows();
    out.sigma_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.f = log_det + (moments.s() * out.sigma_inv).trace() - moments.log_det_s() - static_cast<double>(p);
    return std::isfinite(out.f);
}

/// dF/d(full) from dF = tr[(Sigma^-1 - Sigma^-1 S Sigma^-1) dSigma].
inline Eigen::VectorXd full_gradient(const SampleMoments& moments, const ModelSpec& spec,
                                     const Eigen::VectorXd& full, const Eigen::MatrixXd& sigma_inv) {
    auto mm = unpack(spec, full);
    const Eigen::MatrixXd W = sigma_inv - sigma_inv * moments.s() * sigma_inv;
    const Eigen::MatrixXd WLP = W * mm.lambda * mm.phi;
    const Eigen::MatrixXd LWL = mm.lambda.transpose() * W * mm.lambda;
    const auto p = static_cast<Eigen::Index>(spec.num_indicators());
    const auto m = static_cast<Eigen::Index>(spec.num_factors());

    Eigen::VectorXd g(full.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i) g[k++] = 2.0 * WLP(i, static_cast<Eigen::Index>(spec.factor_of(static_cast<std::size_t>(i))));
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) g[k++] = a == b ? LWL(a, a) : 2.0 * LWL(a, b);
    for (Eigen::Index i = 0; i < p; ++i) g[k++] = W(i, i);
    for (auto [i, j] : spec.residual_covariances()) g[k++] = 2.0 * W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return g;
}

/// dSigma/d(full_k) for every full parameter.
inline std::vector<Eigen::MatrixXd> sigma_derivatives(const ModelSpec& spec, const Eigen::VectorXd& full) {
    auto mm = unpack(spec, full);
    const auto p = static_cast<Eigen::Index>(spec.num_indicators());
    const auto m = static_cast<Eigen::Index>(spec.num_factors());
    const Eigen::MatrixXd LP = mm.lambda * mm.phi;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(full.size()));
    for (Eigen::Index i = 0; i < p; ++i) {
        const auto f = static_cast<Eigen::Index>(spec.factor_of(static_cast<std::size_t>(i)));
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, p);
        d.row(i) += LP.col(f).transpose();
        d.col(i) += LP.col(f);
        out.push_back(std::move(d));
    }
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) {
            Eigen::MatrixXd d = mm.lambda.col(a) * mm.lambda.col(b).transpose();
            if (a != b) d += mm.lambda.col(b) * mm.lambda.col(a).transpose();
            out.push_back(std::move(d));
        }
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, p);
        d(i, i) = 1.0;
        out.push_back(std::move(d));
    }
    for (auto [i, j] : spec.residual_covariances()) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p, p);
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
        d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
        out.push_back(std::move(d));
    }
    return out;
}

/// Expected Hessian of F in reduced coordinates, tr(Sigma^-1 D_j Sigma^-1 D_k).
inline Eigen::MatrixXd expected_hessian(const ModelSpec& spec, const ParameterIndex& index,
                                        const Eigen::VectorXd& full, const Eigen::MatrixXd& sigma_inv) {
    const auto derivs = sigma_derivatives(spec, full);
    const auto k = static_cast<Eigen::Index>(index.reduced_size());
    const auto p = sigma_inv.rows();
    std::vector<Eigen::MatrixXd> M;
    M.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index a = 0; a < index.basis().rows(); ++a)
            if (double w = index.basis()(a, j); w != 0.0) D += w * derivs[static_cast<std::size_t>(a)];
        M.push_back(sigma_inv * D);
    }
    Eigen::MatrixXd H(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b <= a; ++b)
            H(a, b) = H(b, a) = M[static_cast<std::size_t>(a)].cwiseProduct(M[static_cast<std::size_t>(b)].transpose()).sum();
    return H;
}

} // namespace detail

/// Gradient of F_ML with respect to the reduced parameter vector.
inline Eigen::VectorXd discrepancy_gradient(const SampleMoments& moments, const ModelSpec& spec,
                                            const ParameterIndex& index, const Eigen::VectorXd& reduced) {
    const Eigen::VectorXd full = index.expand(reduced);
    detail::Evaluation ev;
    if (!detail::evaluate(moments, spec, full, ev))
        throw NotPositiveDefinite("implied covariance matrix is not positive definite");
    return index.basis().transpose() * detail::full_gradient(moments, spec, full, ev.sigma_inv);
}

/// F_ML at a reduced parameter vector.
inline double discrepancy_at(const SampleMoments& moments, const ModelSpec& spec, const ParameterIndex& index,
                             const Eigen::VectorXd& reduced) {
    return ml_discrepancy(moments, model_implied_covariance(unpack(spec, index.expand(reduced))));
}

struct FitOptions {
    double gradient_tolerance = 1e-9;
    double relative_change_tolerance = 1e-12;
    int max_iterations = 500;
};

/// Start vector: loadings at 1 (or sqrt(s_first)/2 when the factor variance is
/// pinned), factor variances at half the first indicator's variance (or 1),
/// residual variances at half the sample variances, covariances at 0.
/// Projected onto the constraint set.
inline Eigen::VectorXd start_values(const SampleMoments& moments, const ModelSpec& spec, const ParameterIndex& index) {
    const auto& S = moments.s();
    const auto m = spec.num_factors();
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index.full_size()));

    std::vector<std::size_t> var_pos(m);
    {
        std::size_t k = spec.num_indicators();
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b <= a; ++b, ++k)
                if (a == b) var_pos[a] = k;
        }
    }
    for (std::size_t f = 0; f < m; ++f) {
        const auto inds = spec.indicators_of(f);
        const auto first = static_cast<Eigen::Index>(inds.front());
        const bool pinned = index.is_fixed(var_pos[f]);
        for (auto i : inds) full[static_cast<Eigen::Index>(i)] = pinned ? std::sqrt(S(first, first)) / 2.0 : 1.0;
        full[static_cast<Eigen::Index>(var_pos[f])] = pinned ? 1.0 : S(first, first) / 2.0;
    }
    const auto theta0 = static_cast<Eigen::Index>(spec.num_indicators() + m * (m + 1) / 2);
    for (Eigen::Index i = 0; i < S.rows(); ++i) full[theta0 + i] = S(i, i) / 2.0;
    return index.project(full);
}

namespace detail {

/// Flips factors whose first-declared indicator loads negatively, when the
/// flipped vector still satisfies the constraints (only sign-symmetric scalings).
inline Eigen::VectorXd apply_sign_convention(const ModelSpec& spec, const ParameterIndex& index,
                                             Eigen::VectorXd full) {
    const auto m = static_cast<Eigen::Index>(spec.num_factors());
    const auto p = static_cast<Eigen::Index>(spec.num_indicators());
    for (Eigen::Index f = 0; f < m; ++f) {
        const auto first = static_cast<Eigen::Index>(spec.indicators_of(static_cast<std::size_t>(f)).front());
        if (full[first] >= 0.0) continue;
        Eigen::VectorXd flipped = full;
        for (Eigen::Index i = 0; i < p; ++i)
            if (static_cast<Eigen::Index>(spec.factor_of(static_cast<std::size_t>(i))) == f) flipped[i] = -flipped[i];
        Eigen::Index k = p;
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b <= a; ++b, ++k)
                if (a != b && (a == f || b == f)) flipped[k] = -flipped[k];
        if (index.constraint_violation(flipped) < 1e-9) full = std::move(flipped);
    }
    return full;
}

inline Eigen::MatrixXd initial_inverse_hessian(const ModelSpec& spec, const ParameterIndex& index,
                                               const Eigen::VectorXd& full, const Eigen::MatrixXd& sigma_inv) {
    const auto k = static_cast<Eigen::Index>(index.reduced_size());
    Eigen::MatrixXd H = expected_hessian(spec, index, full, sigma_inv);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return llt.solve(Eigen::MatrixXd::Identity(k, k));
    return Eigen::MatrixXd::Identity(k, k);
}

} // namespace detail

/// Minimizes F_ML over the reduced parameters with BFGS and a backtracking
/// line search that halves on non-positive-definite Sigma. The inverse Hessian
/// is seeded from the expected information at the start point.
inline ParameterEstimate fit(const SampleMoments& moments, const ModelSpec& spec, const ParameterIndex& index,
                             const Eigen::VectorXd& start, const FitOptions& opts = {}) {
    if (moments.dim() != static_cast<Eigen::Index>(spec.num_indicators()))
        throw std::invalid_argument("covariance matrix has " + std::to_string(moments.dim()) + " rows but the model has " +
                                    std::to_string(spec.num_indicators()) + " indicators");
    if (index.full_size() != parameter_layout(spec).size())
        throw std::invalid_argument("parameter index was compiled for a different model");
    degrees_of_freedom(spec, index);

    Eigen::VectorXd x = start;
    detail::Evaluation ev;
    if (!detail::evaluate(moments, spec, index.expand(x), ev))
        throw EstimationError("implied covariance matrix is singular at the start values");

    auto reduced_grad = [&](const Eigen::VectorXd& r, const detail::Evaluation& e) -> Eigen::VectorXd {
        return index.basis().transpose() * detail::full_gradient(moments, spec, index.expand(r), e.sigma_inv);
    };

    Eigen::VectorXd g = reduced_grad(x, ev);
    Eigen::MatrixXd Hinv = detail::initial_inverse_hessian(spec, index, index.expand(x), ev.sigma_inv);
    const auto k = static_cast<Eigen::Index>(index.reduced_size());

    int iter = 0;
    bool converged = k == 0 || g.norm() < opts.gradient_tolerance;
    bool reset_done = false;
    while (!converged && iter < opts.max_iterations) {
        ++iter;
        Eigen::VectorXd dir = -Hinv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            Hinv = detail::initial_inverse_hessian(spec, index, index.expand(x), ev.sigma_inv);
            dir = -Hinv * g;
            slope = g.dot(dir);
            if (!(slope < 0.0)) {
                Hinv.setIdentity(k, k);
                dir = -g;
                slope = -g.squaredNorm();
            }
        }

        double step = 1.0;
        detail::Evaluation trial;
        Eigen::VectorXd xn;
        bool accepted = false;
        for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
            xn = x + step * dir;
            if (!detail::evaluate(moments, spec, index.expand(xn), trial)) continue;
            if (trial.f <= ev.f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No descent left at double precision; either we are at the optimum
            // or the curvature model went stale.
            if (g.norm() < 1e-6) {
                converged = true;
                break;
            }
            if (!reset_done) {
                reset_done = true;
                Hinv = detail::initial_inverse_hessian(spec, index, index.expand(x), ev.sigma_inv);
                continue;
            }
            break;
        }
        reset_done = false;

        Eigen::VectorXd gn = reduced_grad(xn, trial);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = gn - g;
        const double sy = s.dot(y);
        const double f_old = ev.f;
        x = std::move(xn);
        ev = std::move(trial);
        g = std::move(gn);

        if (sy > 1e-14 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
            Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }

        if (g.norm() < opts.gradient_tolerance) converged = true;
        else if (std::abs(f_old - ev.f) <= opts.relative_change_tolerance * std::abs(f_old) && g.norm() < 1e-6)
            converged = true;
    }

    if (!converged)
        throw EstimationError("optimizer did not converge after " + std::to_string(iter) +
                              " iterations (gradient norm " + std::to_string(g.norm()) + ")");

    Eigen::VectorXd full = detail::apply_sign_convention(spec, index, index.expand(x));
    x = index.reduce(full);
    full = index.expand(x);
    if (!detail::evaluate(moments, spec, full, ev)) throw EstimationError("implied covariance lost definiteness");
    g = reduced_grad(x, ev);

    auto mm = unpack(spec, full);
    ParameterEstimate est;
    est.lambda = std::move(mm.lambda);
    est.phi = std::move(mm.phi);
    est.theta = std::move(mm.theta);
    est.discrepancy = ml_discrepancy(moments, ev.sigma);
    est.converged = true;
    est.iterations = iter;
    est.gradient_norm = g.norm();
    est.full = std::move(full);
    est.reduced = std::move(x);
    return est;
}

inline ParameterEstimate fit(const SampleMoments& moments, const ModelSpec& spec, const ParameterIndex& index,
                             const FitOptions& opts = {}) {
    if (moments.dim() != static_cast<Eigen::Index>(spec.num_indicators()))
        throw std::invalid_argument("covariance matrix has " + std::to_string(moments.dim()) + " rows but the model has " +
                                    std::to_string(spec.num_indicators()) + " indicators");
    return fit(moments, spec, index, start_values(moments, spec, index), opts);
}

} // namespace scalecheck

#endif // SCALECHECK_ESTIMATOR_HPP
