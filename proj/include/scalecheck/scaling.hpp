#ifndef SCALECHECK_SCALING_HPP
#define SCALECHECK_SCALING_HPP

#include <algorithm>
#include <cstddef>
#include <cctype>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "scalecheck/model.hpp"

namespace scalecheck {

/// One marker indicator per factor, in factor order.
struct FixedMarker {
    std::vector<std::string> markers;
    friend bool operator==(const FixedMarker&, const FixedMarker&) = default;
};
struct FixedFactor {
    friend bool operator==(const FixedFactor&, const FixedFactor&) = default;
};
struct EffectsCoding {
    friend bool operator==(const EffectsCoding&, const EffectsCoding&) = default;
};

using ScalingMethod = std::variant<FixedMarker, FixedFactor, EffectsCoding>;

/// Fixed-marker scaling that uses the indicator at 0-based `position` of every factor.
inline FixedMarker marker_at_position(const ModelSpec& spec, std::size_t position) {
    FixedMarker fm;
    for (std::size_t f = 0; f < spec.num_factors(); ++f) {
        auto inds = spec.indicators_of(f);
        if (position >= inds.size())
            throw ModelError("factor '" + spec.factors()[f] + "' has no indicator at position " +
                             std::to_string(position + 1));
        fm.markers.push_back(spec.indicators()[inds[position]]);
    }
    return fm;
}

/// 0-based within-factor position shared by every marker, if there is one.
inline std::optional<std::size_t> common_marker_position(const ModelSpec& spec, const FixedMarker& fm) {
    std::optional<std::size_t> pos;
    for (std::size_t f = 0; f < spec.num_factors() && f < fm.markers.size(); ++f) {
        auto inds = spec.indicators_of(f);
        auto it = std::find(inds.begin(), inds.end(), spec.indicator_index(fm.markers[f]));
        auto k = static_cast<std::size_t>(it - inds.begin());
        if (pos && *pos != k) return std::nullopt;
        pos = k;
    }
    return pos;
}

/// Short label: "marker-1", "fixed-factor", "effects-coding"; mixed marker
/// choices list the marker names.
inline std::string scaling_name(const ModelSpec& spec, const ScalingMethod& method) {
    if (std::holds_alternative<FixedFactor>(method)) return "fixed-factor";
    if (std::holds_alternative<EffectsCoding>(method)) return "effects-coding";
    const auto& fm = std::get<FixedMarker>(method);
    if (auto pos = common_marker_position(spec, fm)) return "marker-" + std::to_string(*pos + 1);
    std::string out = "marker(";
    for (std::size_t k = 0; k < fm.markers.size(); ++k) out += (k ? "," : "") + fm.markers[k];
    return out + ")";
}

/// Parses "fixed-marker" (first indicators), "marker-<k>", "fixed-factor" or
/// "effects-coding" (also "effects").
inline ScalingMethod parse_scaling(const ModelSpec& spec, const std::string& name) {
    if (name == "fixed-factor" || name == "factor") return FixedFactor{};
    if (name == "effects-coding" || name == "effects") return EffectsCoding{};
    if (name == "fixed-marker" || name == "marker") return marker_at_position(spec, 0);
    if (name.rfind("marker-", 0) == 0) {
        const auto digits = name.substr(7);
        if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            const auto k = std::stoul(digits);
            if (k >= 1) return marker_at_position(spec, k - 1);
        }
    }
    throw std::invalid_argument("unknown scaling '" + name +
                                "' (expected fixed-marker, marker-<k>, fixed-factor or effects-coding)");
}

/// Identification constraints of a scaling method: one per factor.
inline std::vector<Constraint> scaling_constraints(const ModelSpec& spec, const ScalingMethod& method) {
    std::vector<Constraint> out;
    const auto& F = spec.factors();
    if (std::holds_alternative<FixedFactor>(method)) {
        for (const auto& f : F) out.push_back(Constraint::fix(ParamAddress::latent(f, f), 1.0));
    } else if (std::holds_alternative<EffectsCoding>(method)) {
        for (std::size_t f = 0; f < F.size(); ++f) out.push_back(effects_coding_constraint(spec, f));
    } else {
        const auto& fm = std::get<FixedMarker>(method);
        if (fm.markers.size() != F.size())
            throw ModelError("fixed-marker scaling needs exactly one marker per factor");
        for (std::size_t f = 0; f < F.size(); ++f) {
            const auto& x = fm.markers[f];
            if (!spec.has_indicator(x) || spec.factor_of(spec.indicator_index(x)) != f)
                throw ModelError("marker '" + x + "' is not an indicator of factor '" + F[f] + "'");
            out.push_back(Constraint::fix(ParamAddress::loading(F[f], x), 1.0));
        }
    }
    return out;
}

/// Scaling constraints followed by `extra`, skipping extra constraints that
/// repeat one already present (e.g. a marker fixed to 1 by hand).
inline std::vector<Constraint> with_scaling(const ModelSpec& spec, const ScalingMethod& method,
                                            const std::vector<Constraint>& extra) {
    auto out = scaling_constraints(spec, method);
    for (const auto& c : extra) {
        const bool dup = std::any_of(out.begin(), out.end(), [&](const Constraint& o) {
            if (o.kind != c.kind || o.target != c.target || o.terms.size() != c.terms.size()) return false;
            for (std::size_t k = 0; k < o.terms.size(); ++k)
                if (!(o.terms[k].param == c.terms[k].param) || o.terms[k].coefficient != c.terms[k].coefficient) return false;
            return true;
        });
        if (!dup) out.push_back(c);
    }
    return out;
}

/// 0-based within-factor position of a loading's indicator.
inline std::size_t loading_position(const ModelSpec& spec, const ParamAddress& a) {
    if (a.kind != ParamKind::Loading) throw std::invalid_argument(a.to_string() + " is not a loading");
    const auto i = spec.indicator_index(a.second);
    const auto inds = spec.indicators_of(spec.factor_of(i));
    return static_cast<std::size_t>(std::find(inds.begin(), inds.end(), i) - inds.begin());
}

/// Every scaling method with the same marker position in all factors, plus
/// fixed factor and effects coding. Marker positions touched by the tested
/// equality are skipped, since fixing a tested loading degenerates the test.
inline std::vector<ScalingMethod> enumerate_scalings(const ModelSpec& spec, const Constraint& tested) {
    if (tested.kind != ConstraintKind::Equal)
        throw std::invalid_argument("tested constraint must be an equality of two loadings");
    std::set<std::size_t> excluded;
    for (const auto& t : tested.terms) {
        if (t.param.kind != ParamKind::Loading)
            throw std::invalid_argument("tested constraint must be an equality of two loadings");
        excluded.insert(loading_position(spec, t.param));
    }
    std::size_t shortest = spec.indicators_of(0).size();
    for (std::size_t f = 1; f < spec.num_factors(); ++f) shortest = std::min(shortest, spec.indicators_of(f).size());

    std::vector<ScalingMethod> out;
    for (std::size_t k = 0; k < shortest; ++k)
        if (!excluded.count(k)) out.emplace_back(marker_at_position(spec, k));
    out.emplace_back(FixedFactor{});
    out.emplace_back(EffectsCoding{});
    return out;
}

/// All scalings of a model without a tested constraint.
inline std::vector<ScalingMethod> enumerate_scalings(const ModelSpec& spec) {
    std::size_t shortest = spec.indicators_of(0).size();
    for (std::size_t f = 1; f < spec.num_factors(); ++f) shortest = std::min(shortest, spec.indicators_of(f).size());
    std::vector<ScalingMethod> out;
    for (std::size_t k = 0; k < shortest; ++k) out.emplace_back(marker_at_position(spec, k));
    out.emplace_back(FixedFactor{});
    out.emplace_back(EffectsCoding{});
    return out;
}

} // namespace scalecheck

#endif // SCALECHECK_SCALING_HPP
