#ifndef SCALECHECK_INTERPRETATION_HPP
#define SCALECHECK_INTERPRETATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "scalecheck/estimator.hpp"
#include "scalecheck/model.hpp"
#include "scalecheck/parameter_index.hpp"
#include "scalecheck/scaling.hpp"

namespace scalecheck {

enum class CombinationKind {
    LoadingRatio,           // lambda_j / lambda_i, same factor
    LoadingTimesSd,         // lambda_j * sqrt(Phi_ff)
    LoadingToAverage,       // lambda_j / mean(lambda_f)
    VarianceTimesLoadingSq, // Phi_ff * lambda_if^2
    CovarianceTimesLoadings,// Phi_fg * lambda_if * lambda_ig
    Correlation,            // Phi_fg / sqrt(Phi_ff Phi_gg)
    VarianceTimesAverageSq, // Phi_ff * mean(lambda_f)^2
    CovarianceTimesAverages // Phi_fg * mean(lambda_f) * mean(lambda_g)
};

/// A function of the estimates whose value does not depend on the scaling
/// method. `defined` is false when a divisor loading is numerically zero.
struct InvariantCombination {
    CombinationKind kind;
    std::string label;
    double value = 0.0;
    bool defined = true;
    std::vector<ParamAddress> operands;
};

namespace detail {

inline double loading_of(const ModelSpec& spec, const ParameterEstimate& est, std::size_t i) {
    return est.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(spec.factor_of(i)));
}

inline double mean_loading(const ModelSpec& spec, const ParameterEstimate& est, std::size_t f) {
    const auto inds = spec.indicators_of(f);
    double s = 0.0;
    for (auto i : inds) s += loading_of(spec, est, i);
    return s / static_cast<double>(inds.size());
}

inline std::string lam(const ModelSpec& spec, std::size_t i) {
    return "lambda[" + spec.factors()[spec.factor_of(i)] + "->" + spec.indicators()[i] + "]";
}

inline std::string phi(const ModelSpec& spec, std::size_t f, std::size_t g) {
    return "Phi[" + spec.factors()[f] + "," + spec.factors()[g] + "]";
}

inline std::string mean_lam(const ModelSpec& spec, std::size_t f) {
    return "mean(lambda[" + spec.factors()[f] + "])";
}

inline std::vector<ParamAddress> factor_loadings(const ModelSpec& spec, std::size_t f) {
    std::vector<ParamAddress> out;
    for (auto i : spec.indicators_of(f)) out.push_back(ParamAddress::loading(spec.factors()[f], spec.indicators()[i]));
    return out;
}

constexpr double kTinyLoading = 1e-10;

} // namespace detail

/// Scaling-invariant combinations, generated from the model structure:
/// within-factor loading ratios, loadings times factor sd, loadings relative to
/// the factor's average, and the latent (co)variances rescaled by marker
/// loadings, by average loadings, and as correlations.
inline std::vector<InvariantCombination> invariant_combinations(const ParameterEstimate& est, const ModelSpec& spec) {
    std::vector<InvariantCombination> out;
    const auto m = spec.num_factors();
    const auto& F = spec.factors();
    const auto& X = spec.indicators();
    auto L = [&](std::size_t i) { return detail::loading_of(spec, est, i); };
    auto P = [&](std::size_t f, std::size_t g) { return est.phi(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(g)); };
    auto addr = [&](std::size_t i) { return ParamAddress::loading(F[spec.factor_of(i)], X[i]); };
    auto latent = [&](std::size_t f, std::size_t g) { return ParamAddress::latent(F[f], F[g]); };

    for (std::size_t f = 0; f < m; ++f) {
        const auto inds = spec.indicators_of(f);
        for (auto i : inds)
            for (auto j : inds) {
                if (i == j) continue;
                InvariantCombination c{CombinationKind::LoadingRatio, detail::lam(spec, j) + "/" + detail::lam(spec, i)};
                c.operands = {addr(j), addr(i)};
                if (std::abs(L(i)) < detail::kTinyLoading) {
                    c.defined = false;
                    c.value = std::numeric_limits<double>::quiet_NaN();
                } else {
                    c.value = L(j) / L(i);
                }
                out.push_back(std::move(c));
            }
        for (auto j : inds) {
            InvariantCombination c{CombinationKind::LoadingTimesSd, detail::lam(spec, j) + "*sqrt(" + detail::phi(spec, f, f) + ")"};
            c.operands = {addr(j), latent(f, f)};
            c.value = L(j) * std::sqrt(P(f, f));
            c.defined = P(f, f) >= 0.0;
            out.push_back(std::move(c));
        }
        const double avg = detail::mean_loading(spec, est, f);
        for (auto j : inds) {
            InvariantCombination c{CombinationKind::LoadingToAverage, detail::lam(spec, j) + "/" + detail::mean_lam(spec, f)};
            c.operands = detail::factor_loadings(spec, f);
            if (std::abs(avg) < detail::kTinyLoading) {
                c.defined = false;
                c.value = std::numeric_limits<double>::quiet_NaN();
            } else {
                c.value = L(j) / avg;
            }
            out.push_back(std::move(c));
        }
    }

    std::size_t longest = 0;
    for (std::size_t f = 0; f < m; ++f) longest = std::max(longest, spec.indicators_of(f).size());
    for (std::size_t pos = 0; pos < longest; ++pos) {
        std::vector<std::size_t> marker(m, X.size());
        for (std::size_t f = 0; f < m; ++f) {
            const auto inds = spec.indicators_of(f);
            if (pos < inds.size()) marker[f] = inds[pos];
        }
        for (std::size_t f = 0; f < m; ++f) {
            if (marker[f] == X.size()) continue;
            const auto i = marker[f];
            InvariantCombination c{CombinationKind::VarianceTimesLoadingSq, detail::phi(spec, f, f) + "*" + detail::lam(spec, i) + "^2"};
            c.operands = {latent(f, f), addr(i)};
            c.value = P(f, f) * L(i) * L(i);
            out.push_back(std::move(c));
        }
        for (std::size_t f = 0; f < m; ++f)
            for (std::size_t g = f + 1; g < m; ++g) {
                if (marker[f] == X.size() || marker[g] == X.size()) continue;
                InvariantCombination c{CombinationKind::CovarianceTimesLoadings,
                                       detail::phi(spec, f, g) + "*" + detail::lam(spec, marker[f]) + "*" + detail::lam(spec, marker[g])};
                c.operands = {latent(f, g), addr(marker[f]), addr(marker[g])};
                c.value = P(f, g) * L(marker[f]) * L(marker[g]);
                out.push_back(std::move(c));
            }
    }

    for (std::size_t f = 0; f < m; ++f)
        for (std::size_t g = f + 1; g < m; ++g) {
            InvariantCombination c{CombinationKind::Correlation,
                                   detail::phi(spec, f, g) + "/sqrt(" + detail::phi(spec, f, f) + "*" + detail::phi(spec, g, g) + ")"};
            c.operands = {latent(f, g), latent(f, f), latent(g, g)};
            const double d = P(f, f) * P(g, g);
            c.defined = d > 0.0;
            c.value = c.defined ? P(f, g) / std::sqrt(d) : std::numeric_limits<double>::quiet_NaN();
            out.push_back(std::move(c));
        }
    for (std::size_t f = 0; f < m; ++f) {
        const double a = detail::mean_loading(spec, est, f);
        InvariantCombination c{CombinationKind::VarianceTimesAverageSq, detail::phi(spec, f, f) + "*" + detail::mean_lam(spec, f) + "^2"};
        c.operands = detail::factor_loadings(spec, f);
        c.operands.insert(c.operands.begin(), latent(f, f));
        c.value = P(f, f) * a * a;
        out.push_back(std::move(c));
    }
    for (std::size_t f = 0; f < m; ++f)
        for (std::size_t g = f + 1; g < m; ++g) {
            InvariantCombination c{CombinationKind::CovarianceTimesAverages,
                                   detail::phi(spec, f, g) + "*" + detail::mean_lam(spec, f) + "*" + detail::mean_lam(spec, g)};
            c.operands = {latent(f, g)};
            auto lf = detail::factor_loadings(spec, f), lg = detail::factor_loadings(spec, g);
            c.operands.insert(c.operands.end(), lf.begin(), lf.end());
            c.operands.insert(c.operands.end(), lg.begin(), lg.end());
            c.value = P(f, g) * detail::mean_loading(spec, est, f) * detail::mean_loading(spec, est, g);
            out.push_back(std::move(c));
        }
    return out;
}

/// Population quantity that a parameter estimates under a given scaling.
enum class Transformation {
    LoadingRatioToMarker,
    LoadingTimesFactorSd,
    LoadingRatioToAverage,
    VarianceTimesSquaredMarkerLoading,
    VarianceTimesSquaredAverageLoading,
    CovarianceTimesMarkerLoadings,
    CovarianceTimesAverageLoadings,
    LatentCorrelation,
    ResidualCovariance,
    FixedToOne
};

inline const char* to_string(Transformation t) {
    switch (t) {
    case Transformation::LoadingRatioToMarker: return "loading-ratio-to-marker";
    case Transformation::LoadingTimesFactorSd: return "loading-times-factor-sd";
    case Transformation::LoadingRatioToAverage: return "loading-ratio-to-average";
    case Transformation::VarianceTimesSquaredMarkerLoading: return "variance-times-squared-marker-loading";
    case Transformation::VarianceTimesSquaredAverageLoading: return "variance-times-squared-average-loading";
    case Transformation::CovarianceTimesMarkerLoadings: return "covariance-times-marker-loadings";
    case Transformation::CovarianceTimesAverageLoadings: return "covariance-times-average-loadings";
    case Transformation::LatentCorrelation: return "latent-correlation";
    case Transformation::ResidualCovariance: return "plain-residual-(co)variance";
    case Transformation::FixedToOne: return "fixed-to-one";
    }
    return "?";
}

struct InterpretationEntry {
    ParamAddress parameter;
    Transformation transformation;
    std::vector<ParamAddress> reference;  // population loadings the quantity is expressed against
    std::string formula;                  // population notation, e.g. "(A->X2) / (A->X1)"
    std::string rendered_text;
};

namespace detail {

inline std::string path(const std::string& f, const std::string& x) { return "(" + f + "->" + x + ")"; }

inline std::string average_path(const ModelSpec& spec, std::size_t f) {
    std::string s = "mean(";
    auto inds = spec.indicators_of(f);
    for (std::size_t k = 0; k < inds.size(); ++k) s += (k ? ", " : "") + spec.factors()[f] + "->" + spec.indicators()[inds[k]];
    return s + ")";
}

} // namespace detail

/// Maps every model parameter to the population quantity it estimates under
/// `scaling`. Residual entries are the same under every scaling.
inline std::vector<InterpretationEntry> interpretation_report(const ModelSpec& spec, const ScalingMethod& scaling) {
    scaling_constraints(spec, scaling);  // validates markers
    std::vector<InterpretationEntry> out;
    const auto& F = spec.factors();
    const auto& X = spec.indicators();
    const auto* fm = std::get_if<FixedMarker>(&scaling);
    const bool factor = std::holds_alternative<FixedFactor>(scaling);

    auto marker_of = [&](std::size_t f) { return spec.indicator_index(fm->markers[f]); };

    for (auto [f, i] : spec.loadings()) {
        InterpretationEntry e{ParamAddress::loading(F[f], X[i]), Transformation::FixedToOne};
        const auto own = detail::path(F[f], X[i]);
        if (fm) {
            const auto mk = marker_of(f);
            e.reference = {ParamAddress::loading(F[f], X[mk])};
            if (mk == i) {
                e.transformation = Transformation::FixedToOne;
                e.formula = own + " / " + own + " = 1";
                e.rendered_text = X[i] + " is the marker of " + F[f] + "; its loading is fixed to 1";
            } else {
                e.transformation = Transformation::LoadingRatioToMarker;
                e.formula = own + " / " + detail::path(F[f], X[mk]);
                e.rendered_text = "ratio of " + X[i] + "'s factor loading on " + F[f] + " to that of marker " + X[mk];
            }
        } else if (factor) {
            e.transformation = Transformation::LoadingTimesFactorSd;
            e.formula = own + " * sqrt(Var(" + F[f] + "))";
            e.rendered_text = "product of " + X[i] + "'s factor loading on " + F[f] + " and " + F[f] + "'s standard deviation";
        } else {
            e.transformation = Transformation::LoadingRatioToAverage;
            e.reference = detail::factor_loadings(spec, f);
            e.formula = own + " / " + detail::average_path(spec, f);
            e.rendered_text = "ratio of " + X[i] + "'s factor loading on " + F[f] + " to the average loading of " + F[f] +
                              "'s indicators";
        }
        out.push_back(std::move(e));
    }

    for (std::size_t a = 0; a < F.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            InterpretationEntry e{ParamAddress::latent(F[b], F[a]), Transformation::FixedToOne};
            const bool var = a == b;
            if (fm) {
                const auto ma = marker_of(a), mb = marker_of(b);
                if (var) {
                    e.transformation = Transformation::VarianceTimesSquaredMarkerLoading;
                    e.reference = {ParamAddress::loading(F[a], X[ma])};
                    e.formula = "Var(" + F[a] + ") * " + detail::path(F[a], X[ma]) + "^2";
                    e.rendered_text = "product of " + F[a] + "'s variance and the squared loading of its marker " + X[ma];
                } else {
                    e.transformation = Transformation::CovarianceTimesMarkerLoadings;
                    e.reference = {ParamAddress::loading(F[a], X[ma]), ParamAddress::loading(F[b], X[mb])};
                    e.formula = "Cov(" + F[b] + "," + F[a] + ") * " + detail::path(F[b], X[mb]) + " * " + detail::path(F[a], X[ma]);
                    e.rendered_text = "product of the covariance of " + F[b] + " and " + F[a] +
                                      " and the loadings of their markers " + X[mb] + " and " + X[ma];
                }
            } else if (factor) {
                if (var) {
                    e.transformation = Transformation::FixedToOne;
                    e.formula = "Var(" + F[a] + ") / Var(" + F[a] + ") = 1";
                    e.rendered_text = F[a] + "'s variance is fixed to 1 for identification";
                } else {
                    e.transformation = Transformation::LatentCorrelation;
                    e.formula = "Corr(" + F[b] + "," + F[a] + ")";
                    e.rendered_text = "correlation of " + F[b] + " and " + F[a];
                }
            } else {
                if (var) {
                    e.transformation = Transformation::VarianceTimesSquaredAverageLoading;
                    e.reference = detail::factor_loadings(spec, a);
                    e.formula = "Var(" + F[a] + ") * " + detail::average_path(spec, a) + "^2";
                    e.rendered_text = "product of " + F[a] + "'s variance and the squared average loading of its indicators";
                } else {
                    e.transformation = Transformation::CovarianceTimesAverageLoadings;
                    e.reference = detail::factor_loadings(spec, b);
                    auto ra = detail::factor_loadings(spec, a);
                    e.reference.insert(e.reference.end(), ra.begin(), ra.end());
                    e.formula = "Cov(" + F[b] + "," + F[a] + ") * " + detail::average_path(spec, b) + " * " +
                                detail::average_path(spec, a);
                    e.rendered_text = "product of the covariance of " + F[b] + " and " + F[a] +
                                      " and the average loadings of their indicators";
                }
            }
            out.push_back(std::move(e));
        }

    for (const auto& x : X)
        out.push_back({ParamAddress::residual(x, x), Transformation::ResidualCovariance, {}, "Var(E_" + x + ")",
                       "variance of " + x + "'s error term"});
    for (auto [i, j] : spec.residual_covariances())
        out.push_back({ParamAddress::residual(X[i], X[j]), Transformation::ResidualCovariance, {},
                       "Cov(E_" + X[i] + ",E_" + X[j] + ")", "covariance of the error terms of " + X[i] + " and " + X[j]});
    return out;
}

} // namespace scalecheck

#endif // SCALECHECK_INTERPRETATION_HPP
