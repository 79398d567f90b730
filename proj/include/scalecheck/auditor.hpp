#ifndef SCALECHECK_AUDITOR_HPP
#define SCALECHECK_AUDITOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <future>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scalecheck/estimator.hpp"
#include "scalecheck/fitstats.hpp"
#include "scalecheck/interpretation.hpp"
#include "scalecheck/model.hpp"
#include "scalecheck/parameter_index.hpp"
#include "scalecheck/scaling.hpp"

namespace scalecheck {

/// The tested equality lambda_a = lambda_b, resolved against the spec.
struct TestedLoadings {
    std::size_t a = 0, b = 0;                // indicator indices
    std::size_t factor_a = 0, factor_b = 0;  // factor indices
};

inline TestedLoadings resolve_tested(const ModelSpec& spec, const Constraint& tested) {
    if (tested.kind != ConstraintKind::Equal || tested.terms.size() != 2 ||
        tested.terms[0].param.kind != ParamKind::Loading || tested.terms[1].param.kind != ParamKind::Loading)
        throw std::invalid_argument("tested constraint must be an equality of two loadings");
    TestedLoadings t;
    t.a = spec.indicator_index(tested.terms[0].param.second);
    t.b = spec.indicator_index(tested.terms[1].param.second);
    t.factor_a = spec.factor_of(t.a);
    t.factor_b = spec.factor_of(t.b);
    if (t.factor_a != spec.factor_index(tested.terms[0].param.first) ||
        t.factor_b != spec.factor_index(tested.terms[1].param.first))
        throw std::invalid_argument("tested loading does not belong to the named factor");
    if (t.factor_a == t.factor_b)
        throw std::invalid_argument("tested equality must compare loadings of two different factors");
    return t;
}

enum class HypothesisForm { MarkerRatio, FactorSdProduct, AverageRatio };

/// The null hypothesis a loading equality actually tests under one scaling,
/// in population notation. `ratio_form` is the equivalent statement
/// (A->Xa)/(B->Xb) = comparison term.
struct TestedHypothesis {
    HypothesisForm form;
    std::string lhs;
    std::string rhs;
    std::string ratio_form;
    std::size_t marker_a = 0, marker_b = 0;  // MarkerRatio only
};

inline TestedHypothesis tested_hypothesis(const ModelSpec& spec, const Constraint& tested, const ScalingMethod& scaling) {
    const auto t = resolve_tested(spec, tested);
    const auto& F = spec.factors();
    const auto& X = spec.indicators();
    const auto A = F[t.factor_a], B = F[t.factor_b];
    const auto pa = "(" + A + "->" + X[t.a] + ")", pb = "(" + B + "->" + X[t.b] + ")";
    TestedHypothesis h{};
    if (const auto* fm = std::get_if<FixedMarker>(&scaling)) {
        scaling_constraints(spec, scaling);
        h.form = HypothesisForm::MarkerRatio;
        h.marker_a = spec.indicator_index(fm->markers[t.factor_a]);
        h.marker_b = spec.indicator_index(fm->markers[t.factor_b]);
        const auto ma = "(" + A + "->" + X[h.marker_a] + ")", mb = "(" + B + "->" + X[h.marker_b] + ")";
        h.lhs = pa + " / " + ma;
        h.rhs = pb + " / " + mb;
        h.ratio_form = pa + " / " + pb + " = " + ma + " / " + mb;
    } else if (std::holds_alternative<FixedFactor>(scaling)) {
        h.form = HypothesisForm::FactorSdProduct;
        h.lhs = pa + " * sqrt(Var(" + A + "))";
        h.rhs = pb + " * sqrt(Var(" + B + "))";
        h.ratio_form = pa + " / " + pb + " = sqrt(Var(" + B + ")) / sqrt(Var(" + A + "))";
    } else {
        h.form = HypothesisForm::AverageRatio;
        h.lhs = pa + " / " + detail::average_path(spec, t.factor_a);
        h.rhs = pb + " / " + detail::average_path(spec, t.factor_b);
        auto others = [&](std::size_t f, std::size_t skip) {
            std::string s;
            for (auto i : spec.indicators_of(f))
                if (i != skip) s += (s.empty() ? "" : " + ") + std::string("(") + F[f] + "->" + X[i] + ")";
            return "[" + s + "]";
        };
        h.ratio_form = pa + " / " + pb + " = " + others(t.factor_a, t.a) + " / " + others(t.factor_b, t.b);
    }
    return h;
}

/// Both sides of the hypothesis evaluated at an estimate (any scaling: the
/// sides are scaling-invariant combinations).
inline std::pair<double, double> hypothesis_sides(const ModelSpec& spec, const Constraint& tested,
                                                  const TestedHypothesis& h, const ParameterEstimate& est) {
    const auto t = resolve_tested(spec, tested);
    auto L = [&](std::size_t i) { return detail::loading_of(spec, est, i); };
    auto P = [&](std::size_t f) { return est.phi(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)); };
    switch (h.form) {
    case HypothesisForm::MarkerRatio: return {L(t.a) / L(h.marker_a), L(t.b) / L(h.marker_b)};
    case HypothesisForm::FactorSdProduct: return {L(t.a) * std::sqrt(P(t.factor_a)), L(t.b) * std::sqrt(P(t.factor_b))};
    case HypothesisForm::AverageRatio:
        return {L(t.a) / detail::mean_loading(spec, est, t.factor_a), L(t.b) / detail::mean_loading(spec, est, t.factor_b)};
    }
    return {0.0, 0.0};
}

/// Both sides of the equivalent ratio form: lambda_a / lambda_b and the comparison term.
inline std::pair<double, double> ratio_form_sides(const ModelSpec& spec, const Constraint& tested,
                                                  const TestedHypothesis& h, const ParameterEstimate& est) {
    const auto t = resolve_tested(spec, tested);
    auto L = [&](std::size_t i) { return detail::loading_of(spec, est, i); };
    auto P = [&](std::size_t f) { return est.phi(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)); };
    const double lhs = L(t.a) / L(t.b);
    switch (h.form) {
    case HypothesisForm::MarkerRatio: return {lhs, L(h.marker_a) / L(h.marker_b)};
    case HypothesisForm::FactorSdProduct: return {lhs, std::sqrt(P(t.factor_b)) / std::sqrt(P(t.factor_a))};
    case HypothesisForm::AverageRatio: {
        double sa = 0.0, sb = 0.0;
        for (auto i : spec.indicators_of(t.factor_a))
            if (i != t.a) sa += L(i);
        for (auto i : spec.indicators_of(t.factor_b))
            if (i != t.b) sb += L(i);
        return {lhs, sa / sb};
    }
    }
    return {lhs, 0.0};
}

enum class DivergenceKind { MarkerSdRatio, MarkerPair };

struct DivergenceTerm {
    DivergenceKind kind;
    std::string label;
    double value = 0.0;
};

/// Terms whose distance from 1 measures how far apart the hypotheses tested
/// under different scalings are:
///   - per marker position i: (A->Xi)*sd(A) / ((B->Xi)*sd(B)), marker scaling
///     against fixed factor;
///   - per ordered marker pair (i, k): [(A->Xi)/(A->Xk)] * [(B->Xk)/(B->Xi)],
///     marker i against marker k.
/// Positions are those enumerate_scalings() offers for the tested equality.
inline std::vector<DivergenceTerm> divergence_diagnostic(const ModelSpec& spec, const Constraint& tested,
                                                         const ParameterEstimate& unrestricted) {
    const auto t = resolve_tested(spec, tested);
    const auto& F = spec.factors();
    const auto& X = spec.indicators();
    const auto ia = spec.indicators_of(t.factor_a), ib = spec.indicators_of(t.factor_b);
    auto L = [&](std::size_t i) { return detail::loading_of(spec, unrestricted, i); };
    auto P = [&](std::size_t f) { return unrestricted.phi(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f)); };
    auto path = [&](std::size_t f, std::size_t i) { return "(" + F[f] + "->" + X[i] + ")"; };

    std::vector<std::size_t> positions;
    for (const auto& s : enumerate_scalings(spec, tested))
        if (const auto* fm = std::get_if<FixedMarker>(&s)) positions.push_back(*common_marker_position(spec, *fm));

    std::vector<DivergenceTerm> out;
    const auto A = t.factor_a, B = t.factor_b;
    for (auto pos : positions) {
        const auto xa = ia[pos], xb = ib[pos];
        out.push_back({DivergenceKind::MarkerSdRatio,
                       path(A, xa) + "*sd(" + F[A] + ") / (" + path(B, xb) + "*sd(" + F[B] + "))",
                       L(xa) * std::sqrt(P(A)) / (L(xb) * std::sqrt(P(B)))});
    }
    for (auto pi : positions)
        for (auto pk : positions) {
            if (pi == pk) continue;
            const auto ai = ia[pi], ak = ia[pk], bi = ib[pi], bk = ib[pk];
            out.push_back({DivergenceKind::MarkerPair,
                           "[" + path(A, ai) + "/" + path(A, ak) + "] * [" + path(B, bk) + "/" + path(B, bi) + "]",
                           (L(ai) / L(ak)) * (L(bk) / L(bi))});
        }
    return out;
}

struct ScalingEquivalence {
    ScalingMethod first;
    ScalingMethod second;
    std::string reason;
};

/// Scaling pairs whose tested hypotheses are algebraically equivalent. The
/// only generic case: when both tested factors have exactly two indicators,
/// marking each factor by its untested indicator is equivalent to effects
/// coding, since a/(a+c) = b/(b+d) <=> a/c = b/d.
inline std::vector<ScalingEquivalence> hypothesis_equivalence_check(const ModelSpec& spec, const Constraint& tested) {
    const auto t = resolve_tested(spec, tested);
    const auto ia = spec.indicators_of(t.factor_a), ib = spec.indicators_of(t.factor_b);
    if (ia.size() != 2 || ib.size() != 2) return {};
    const auto other_a = ia[0] == t.a ? ia[1] : ia[0];
    const auto other_b = ib[0] == t.b ? ib[1] : ib[0];
    const auto pos = static_cast<std::size_t>(std::find(ia.begin(), ia.end(), other_a) - ia.begin());

    FixedMarker fm;
    for (std::size_t f = 0; f < spec.num_factors(); ++f) {
        if (f == t.factor_a) fm.markers.push_back(spec.indicators()[other_a]);
        else if (f == t.factor_b) fm.markers.push_back(spec.indicators()[other_b]);
        else {
            const auto inds = spec.indicators_of(f);
            fm.markers.push_back(spec.indicators()[inds[pos < inds.size() ? pos : 0]]);
        }
    }
    return {{fm, EffectsCoding{}, "both tested factors have two indicators"}};
}

enum class Decision { Accept, Reject };

inline const char* to_string(Decision d) { return d == Decision::Reject ? "reject" : "accept"; }

struct AuditRecord {
    ScalingMethod scaling;
    std::string name;
    ParameterEstimate unrestricted_estimate;
    ParameterEstimate restricted_estimate;
    FitStatistics unrestricted;
    FitStatistics restricted;
    DifferenceStatistics difference;
    Decision decision = Decision::Accept;
    TestedHypothesis hypothesis;
};

struct AuditReport {
    Constraint tested;
    double alpha = 0.05;
    BaselineFit baseline;
    std::vector<AuditRecord> records;
    bool interaction_detected = false;
    double max_delta_chi_square = 0.0;
    double min_delta_chi_square = 0.0;
    std::vector<DivergenceTerm> divergence;
    std::vector<ScalingEquivalence> equivalences;
};

/// Recomputes decisions and the interaction flag at a new level from the
/// stored p-values.
inline void apply_alpha(AuditReport& report, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    report.alpha = alpha;
    bool any_reject = false, any_accept = false;
    for (auto& r : report.records) {
        r.decision = r.difference.p_value < alpha ? Decision::Reject : Decision::Accept;
        (r.decision == Decision::Reject ? any_reject : any_accept) = true;
    }
    report.interaction_detected = any_reject && any_accept;
}

/// Fits the unrestricted and restricted model under every applicable scaling
/// (concurrently), runs the difference tests and flags constraint interaction.
/// `extra` constraints are added to both models of every scaling.
inline AuditReport audit(const SampleMoments& moments, const ModelSpec& spec, const Constraint& tested, double alpha,
                         const std::vector<Constraint>& extra = {}) {
    resolve_tested(spec, tested);
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");

    AuditReport report;
    report.tested = tested;
    report.baseline = fit_baseline(moments);
    const auto scalings = enumerate_scalings(spec, tested);

    auto job = [&](const ScalingMethod& s) {
        AuditRecord rec;
        rec.scaling = s;
        rec.name = scaling_name(spec, s);
        try {
            auto cons = with_scaling(spec, s, extra);
            const auto uidx = compile_constraints(spec, cons);
            cons.push_back(tested);
            const auto ridx = compile_constraints(spec, cons);
            rec.unrestricted_estimate = fit(moments, spec, uidx);
            rec.restricted_estimate = fit(moments, spec, ridx);
            rec.unrestricted = compute_fit_statistics(moments, rec.unrestricted_estimate, degrees_of_freedom(spec, uidx), report.baseline);
            rec.restricted = compute_fit_statistics(moments, rec.restricted_estimate, degrees_of_freedom(spec, ridx), report.baseline);
            rec.difference = difference_test(rec.unrestricted, rec.restricted);
            rec.hypothesis = tested_hypothesis(spec, tested, s);
        } catch (const ConstraintError& e) {
            throw ConstraintError("scaling " + rec.name + ": " + e.what());
        } catch (const ModelError& e) {
            throw ModelError("scaling " + rec.name + ": " + e.what());
        } catch (const std::exception& e) {
            throw EstimationError("scaling " + rec.name + ": " + e.what());
        }
        return rec;
    };

    std::vector<std::future<AuditRecord>> jobs;
    jobs.reserve(scalings.size());
    for (const auto& s : scalings) jobs.push_back(std::async(std::launch::async, job, std::cref(s)));
    for (auto& j : jobs) report.records.push_back(j.get());

    double umin = report.records.front().unrestricted.chi_square, umax = umin;
    report.min_delta_chi_square = report.max_delta_chi_square = report.records.front().difference.delta_chi_square;
    for (const auto& r : report.records) {
        umin = std::min(umin, r.unrestricted.chi_square);
        umax = std::max(umax, r.unrestricted.chi_square);
        report.min_delta_chi_square = std::min(report.min_delta_chi_square, r.difference.delta_chi_square);
        report.max_delta_chi_square = std::max(report.max_delta_chi_square, r.difference.delta_chi_square);
    }
    if (umax - umin > 1e-4)
        throw EstimationError("unrestricted fits disagree across scalings (chi-square range " + std::to_string(umin) +
                              " to " + std::to_string(umax) + "); an optimizer stopped at a non-global optimum");

    report.divergence = divergence_diagnostic(spec, tested, report.records.front().unrestricted_estimate);
    report.equivalences = hypothesis_equivalence_check(spec, tested);
    apply_alpha(report, alpha);
    return report;
}

} // namespace scalecheck

#endif // SCALECHECK_AUDITOR_HPP
