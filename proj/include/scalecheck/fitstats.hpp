#ifndef SCALECHECK_FITSTATS_HPP
#define SCALECHECK_FITSTATS_HPP

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "scalecheck/estimator.hpp"
#include "scalecheck/model.hpp"
#include "scalecheck/parameter_index.hpp"

namespace scalecheck {

/// Test statistic T = N * F_ML. The sample covariance uses the N
/// denominator, so N (not N - 1) multiplies the discrepancy.
inline double chi_square_statistic(double discrepancy, std::size_t n) {
    if (discrepancy < 0.0) throw std::invalid_argument("discrepancy must be nonnegative");
    return static_cast<double>(n) * discrepancy;
}

/// P(X >= x) for X ~ chi-square(df): the regularized upper incomplete gamma Q(df/2, x/2).
inline double chi_square_upper_tail(double x, int df) {
    if (df < 1) throw std::invalid_argument("chi-square degrees of freedom must be positive");
    if (std::isnan(x)) throw std::invalid_argument("chi-square statistic is NaN");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

struct BaselineFit {
    double chi_square = 0.0;
    int df = 0;
};

/// Independence model: free variances, zero covariances. Its ML optimum is
/// Sigma = diag(S), so no iteration is needed.
inline BaselineFit fit_baseline(const SampleMoments& moments) {
    const Eigen::MatrixXd sigma = moments.s().diagonal().asDiagonal();
    const auto p = static_cast<int>(moments.dim());
    return {chi_square_statistic(ml_discrepancy(moments, sigma), moments.n()), p * (p - 1) / 2};
}

/// Constraints that turn a factor model into the independence model: every
/// loading and residual covariance 0, the latent covariance matrix pinned to
/// the identity. Only residual variances stay free.
inline std::vector<Constraint> independence_constraints(const ModelSpec& spec) {
    std::vector<Constraint> out;
    const auto& F = spec.factors();
    const auto& X = spec.indicators();
    for (auto [f, i] : spec.loadings()) out.push_back(Constraint::fix(ParamAddress::loading(F[f], X[i]), 0.0));
    for (std::size_t a = 0; a < F.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b)
            out.push_back(Constraint::fix(ParamAddress::latent(F[a], F[b]), a == b ? 1.0 : 0.0));
    for (auto [i, j] : spec.residual_covariances()) out.push_back(Constraint::fix(ParamAddress::residual(X[i], X[j]), 0.0));
    return out;
}

struct FitStatistics {
    double chi_square = 0.0;
    int df = 0;
    double p_value = 1.0;
    double cfi = 1.0;
    double rmsea = 0.0;
    double srmr = 0.0;
    bool rmsea_defined = true;  // false when df == 0
};

struct DifferenceStatistics {
    double delta_chi_square = 0.0;
    int delta_df = 0;
    double p_value = 1.0;
    double delta_cfi = 0.0;
    double delta_rmsea = 0.0;
    double delta_srmr = 0.0;
};

/// Standardized root mean square residual over the p(p+1)/2 unique elements,
/// residuals scaled by sqrt(s_ii s_jj).
inline double srmr(const Eigen::MatrixXd& s, const Eigen::MatrixXd& sigma) {
    const auto p = s.rows();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double r = (s(i, j) - sigma(i, j)) / std::sqrt(s(i, i) * s(j, j));
            sum += r * r;
        }
    return std::sqrt(sum / static_cast<double>(p * (p + 1) / 2));
}

/// CFI, RMSEA (N in the denominator) and SRMR for one fitted model.
inline FitStatistics compute_fit_statistics(double chi_square, int df, std::size_t n, const BaselineFit& baseline,
                                            const Eigen::MatrixXd& s, const Eigen::MatrixXd& sigma) {
    if (df < 0) throw std::invalid_argument("degrees of freedom must be nonnegative");
    FitStatistics out;
    out.chi_square = chi_square;
    out.df = df;
    out.p_value = df > 0 ? chi_square_upper_tail(chi_square, df) : (chi_square > 1e-9 ? 0.0 : 1.0);

    const double excess = std::max(chi_square - df, 0.0);
    const double denom = std::max({baseline.chi_square - baseline.df, chi_square - df, 0.0});
    out.cfi = denom > 0.0 ? 1.0 - excess / denom : 1.0;

    if (df == 0) {
        out.rmsea = 0.0;
        out.rmsea_defined = false;
    } else {
        out.rmsea = std::sqrt(excess / (static_cast<double>(df) * static_cast<double>(n)));
    }
    out.srmr = srmr(s, sigma);
    return out;
}

/// Fit statistics of an estimate against its moments.
inline FitStatistics compute_fit_statistics(const SampleMoments& moments, const ParameterEstimate& est, int df,
                                            const BaselineFit& baseline) {
    return compute_fit_statistics(chi_square_statistic(est.discrepancy, moments.n()), df, moments.n(), baseline,
                                  moments.s(), model_implied_covariance(est));
}

/// Thrown when the restricted model fits better than the model it is nested in.
class NestingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Likelihood-ratio difference of a nested pair; deltas are restricted minus unrestricted.
inline DifferenceStatistics difference_test(const FitStatistics& unrestricted, const FitStatistics& restricted) {
    DifferenceStatistics d;
    d.delta_df = restricted.df - unrestricted.df;
    if (d.delta_df < 1) throw std::invalid_argument("restricted model must have more degrees of freedom");
    d.delta_chi_square = restricted.chi_square - unrestricted.chi_square;
    if (d.delta_chi_square < -1e-6)
        throw NestingError("restricted model fits better than the unrestricted model (delta chi-square " +
                           std::to_string(d.delta_chi_square) + "); the models are not nested");
    d.p_value = chi_square_upper_tail(std::max(d.delta_chi_square, 0.0), d.delta_df);
    d.delta_cfi = restricted.cfi - unrestricted.cfi;
    d.delta_rmsea = restricted.rmsea - unrestricted.rmsea;
    d.delta_srmr = restricted.srmr - unrestricted.srmr;
    return d;
}

} // namespace scalecheck

#endif // SCALECHECK_FITSTATS_HPP
