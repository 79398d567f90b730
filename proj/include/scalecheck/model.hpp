#ifndef SCALECHECK_MODEL_HPP
#define SCALECHECK_MODEL_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scalecheck {

/// Raised for malformed model or constraint sources and for specs that violate
/// the simple-structure invariants. `line()` is 0 when no source line applies.
class ModelError : public std::invalid_argument {
public:
    explicit ModelError(const std::string& what, std::size_t line = 0)
        : std::invalid_argument(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

enum class ParamKind { Loading, LatentCov, ResidualCov };

/// Symbolic address of one model parameter.
///   Loading:     first = factor,    second = indicator
///   LatentCov:   first, second = factors (equal for a variance)
///   ResidualCov: first, second = indicators (equal for a variance)
struct ParamAddress {
    ParamKind kind = ParamKind::Loading;
    std::string first;
    std::string second;

    static ParamAddress loading(std::string factor, std::string indicator) {
        return {ParamKind::Loading, std::move(factor), std::move(indicator)};
    }
    static ParamAddress latent(std::string a, std::string b) {
        return {ParamKind::LatentCov, std::move(a), std::move(b)};
    }
    static ParamAddress residual(std::string a, std::string b) {
        return {ParamKind::ResidualCov, std::move(a), std::move(b)};
    }

    /// Covariances are unordered pairs; loadings are not.
    bool same_as(const ParamAddress& o) const {
        if (kind != o.kind) return false;
        if (first == o.first && second == o.second) return true;
        return kind != ParamKind::Loading && first == o.second && second == o.first;
    }
    friend bool operator==(const ParamAddress& a, const ParamAddress& b) { return a.same_as(b); }

    std::string to_string() const {
        return kind == ParamKind::Loading ? first + "->" + second : first + "~~" + second;
    }
};

struct ConstraintTerm {
    ParamAddress param;
    double coefficient = 1.0;
};

enum class ConstraintKind { FixValue, Equal, LinearSum };

/// A linear equality over model parameters: sum(coefficient * param) = target.
struct Constraint {
    ConstraintKind kind = ConstraintKind::LinearSum;
    std::vector<ConstraintTerm> terms;
    double target = 0.0;

    static Constraint fix(ParamAddress p, double value) {
        return {ConstraintKind::FixValue, {{std::move(p), 1.0}}, value};
    }
    static Constraint equal(ParamAddress a, ParamAddress b) {
        return {ConstraintKind::Equal, {{std::move(a), 1.0}, {std::move(b), -1.0}}, 0.0};
    }
    static Constraint linear_sum(std::vector<ConstraintTerm> terms, double target) {
        return {ConstraintKind::LinearSum, std::move(terms), target};
    }

    std::string to_string() const {
        std::ostringstream os;
        switch (kind) {
        case ConstraintKind::FixValue:
            os << terms.at(0).param.to_string() << " = " << target;
            break;
        case ConstraintKind::Equal:
            os << terms.at(0).param.to_string() << " = " << terms.at(1).param.to_string();
            break;
        case ConstraintKind::LinearSum:
            for (std::size_t i = 0; i < terms.size(); ++i) {
                if (i) os << " + ";
                if (terms[i].coefficient != 1.0) os << terms[i].coefficient << "*";
                os << terms[i].param.to_string();
            }
            os << " = " << target;
            break;
        }
        return os.str();
    }
};

/// Simple-structure CFA model: every indicator loads on exactly one factor,
/// all latent (co)variances are free, residual variances are free, and the
/// listed residual covariances are free.
class ModelSpec {
public:
    ModelSpec() = default;

    /// Builds a spec from (factor, indicators) groups in declaration order.
    ModelSpec(std::vector<std::pair<std::string, std::vector<std::string>>> groups,
              std::vector<std::pair<std::string, std::string>> residual_covariances = {}) {
        for (auto& [f, inds] : groups) {
            if (has_factor(f)) throw ModelError("factor '" + f + "' declared twice");
            if (has_indicator(f)) throw ModelError("name '" + f + "' used as both factor and indicator");
            factors_.push_back(f);
            for (auto& x : inds) add_loading(factors_.size() - 1, x, 0);
        }
        for (auto& [a, b] : residual_covariances) add_residual_covariance(a, b, 0);
        validate();
    }

    const std::vector<std::string>& factors() const noexcept { return factors_; }
    const std::vector<std::string>& indicators() const noexcept { return indicators_; }
    std::size_t num_factors() const noexcept { return factors_.size(); }
    std::size_t num_indicators() const noexcept { return indicators_.size(); }

    /// Factor index of indicator `i`.
    std::size_t factor_of(std::size_t i) const { return indicator_factor_.at(i); }

    /// Indicator indices of factor `f`, in declaration order.
    std::vector<std::size_t> indicators_of(std::size_t f) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < indicators_.size(); ++i)
            if (indicator_factor_[i] == f) out.push_back(i);
        return out;
    }

    /// (factor, indicator) index pairs for every loading, in indicator order.
    std::vector<std::pair<std::size_t, std::size_t>> loadings() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 0; i < indicators_.size(); ++i) out.emplace_back(indicator_factor_[i], i);
        return out;
    }

    /// Off-diagonal residual covariances as indicator index pairs (first < second).
    const std::vector<std::pair<std::size_t, std::size_t>>& residual_covariances() const noexcept {
        return residual_covs_;
    }

    bool has_factor(std::string_view name) const {
        return std::find(factors_.begin(), factors_.end(), name) != factors_.end();
    }
    bool has_indicator(std::string_view name) const {
        return std::find(indicators_.begin(), indicators_.end(), name) != indicators_.end();
    }
    std::size_t factor_index(std::string_view name) const {
        auto it = std::find(factors_.begin(), factors_.end(), name);
        if (it == factors_.end()) throw ModelError("unknown factor '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - factors_.begin());
    }
    std::size_t indicator_index(std::string_view name) const {
        auto it = std::find(indicators_.begin(), indicators_.end(), name);
        if (it == indicators_.end()) throw ModelError("unknown indicator '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - indicators_.begin());
    }

    /// Number of distinct sample moments, p(p+1)/2.
    std::size_t num_moments() const noexcept {
        auto p = indicators_.size();
        return p * (p + 1) / 2;
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

private:
    friend ModelSpec parse_model_spec(std::string_view text);

    void add_loading(std::size_t f, const std::string& x, std::size_t line) {
        if (has_factor(x)) throw ModelError("'" + x + "' is a factor and cannot be an indicator", line);
        if (has_indicator(x)) {
            auto i = indicator_index(x);
            if (indicator_factor_[i] == f)
                throw ModelError("indicator '" + x + "' listed twice for factor '" + factors_[f] + "'", line);
            throw ModelError("indicator '" + x + "' assigned to two factors ('" + factors_[indicator_factor_[i]] +
                                 "' and '" + factors_[f] + "')",
                             line);
        }
        indicators_.push_back(x);
        indicator_factor_.push_back(f);
    }

    void add_residual_covariance(const std::string& a, const std::string& b, std::size_t line) {
        if (!has_indicator(a)) throw ModelError("unknown indicator '" + a + "'", line);
        if (!has_indicator(b)) throw ModelError("unknown indicator '" + b + "'", line);
        auto i = indicator_index(a), j = indicator_index(b);
        if (i == j) throw ModelError("residual variance of '" + a + "' is always free", line);
        if (i > j) std::swap(i, j);
        if (std::find(residual_covs_.begin(), residual_covs_.end(), std::pair{i, j}) != residual_covs_.end())
            throw ModelError("duplicate residual covariance " + a + " ~~ " + b, line);
        residual_covs_.emplace_back(i, j);
    }

    void validate() const {
        if (factors_.empty()) throw ModelError("model declares no factors");
        for (std::size_t f = 0; f < factors_.size(); ++f) {
            auto n = indicators_of(f).size();
            if (n < 2)
                throw ModelError("factor '" + factors_[f] + "' has " + std::to_string(n) +
                                 " indicator(s); at least 2 are required");
        }
    }

    std::vector<std::string> factors_;
    std::vector<std::string> indicators_;
    std::vector<std::size_t> indicator_factor_;
    std::vector<std::pair<std::size_t, std::size_t>> residual_covs_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    auto ok = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; };
    if (std::isdigit(static_cast<unsigned char>(s.front()))) return false;
    return std::all_of(s.begin(), s.end(), ok);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view strip_comment(std::string_view line) {
    auto hash = line.find('#');
    return hash == std::string_view::npos ? line : line.substr(0, hash);
}

} // namespace detail

/// Parses the line-oriented model syntax:
///
///     # comment
///     A =~ X1 + X2        loadings of factor A
///     X1 ~~ X3            free residual covariance
///
/// Several statements may share a line when separated by ';'.
inline ModelSpec parse_model_spec(std::string_view text) {
    ModelSpec spec;
    struct PendingCov {
        std::string a, b;
        std::size_t line;
    };
    std::vector<PendingCov> covs;

    std::size_t lineno = 0;
    for (auto raw : detail::split(text, '\n')) {
        ++lineno;
        for (auto stmt : detail::split(detail::strip_comment(raw), ';')) {
            stmt = detail::trim(stmt);
            if (stmt.empty()) continue;
            if (auto pos = stmt.find("=~"); pos != std::string_view::npos) {
                auto lhs = detail::trim(stmt.substr(0, pos));
                if (!detail::is_identifier(lhs)) throw ModelError("invalid factor name '" + std::string(lhs) + "'", lineno);
                std::string f(lhs);
                if (spec.has_indicator(f)) throw ModelError("'" + f + "' is an indicator and cannot be a factor", lineno);
                if (spec.has_factor(f)) throw ModelError("factor '" + f + "' declared twice", lineno);
                spec.factors_.push_back(f);
                auto rhs = stmt.substr(pos + 2);
                for (auto item : detail::split(rhs, '+')) {
                    item = detail::trim(item);
                    if (!detail::is_identifier(item))
                        throw ModelError("invalid indicator name '" + std::string(item) + "'", lineno);
                    spec.add_loading(spec.factors_.size() - 1, std::string(item), lineno);
                }
            } else if (auto pos = stmt.find("~~"); pos != std::string_view::npos) {
                auto a = detail::trim(stmt.substr(0, pos));
                auto b = detail::trim(stmt.substr(pos + 2));
                if (!detail::is_identifier(a) || !detail::is_identifier(b))
                    throw ModelError("malformed covariance statement '" + std::string(stmt) + "'", lineno);
                covs.push_back({std::string(a), std::string(b), lineno});
            } else {
                throw ModelError("expected '=~' or '~~' in '" + std::string(stmt) + "'", lineno);
            }
        }
    }

    for (auto& c : covs) {
        bool fa = spec.has_factor(c.a), fb = spec.has_factor(c.b);
        if (fa && fb) continue;  // latent (co)variances are always free
        if (fa || fb) throw ModelError("cannot covary factor and indicator: " + c.a + " ~~ " + c.b, c.line);
        if (c.a == c.b) {
            if (!spec.has_indicator(c.a)) throw ModelError("unknown indicator '" + c.a + "'", c.line);
            continue;  // residual variances are always free
        }
        spec.add_residual_covariance(c.a, c.b, c.line);
    }
    spec.validate();
    return spec;
}

/// Inverse of parse_model_spec.
inline std::string to_model_text(const ModelSpec& spec) {
    std::ostringstream os;
    for (std::size_t f = 0; f < spec.num_factors(); ++f) {
        os << spec.factors()[f] << " =~ ";
        auto inds = spec.indicators_of(f);
        for (std::size_t k = 0; k < inds.size(); ++k) os << (k ? " + " : "") << spec.indicators()[inds[k]];
        os << '\n';
    }
    for (auto [i, j] : spec.residual_covariances())
        os << spec.indicators()[i] << " ~~ " << spec.indicators()[j] << '\n';
    return os.str();
}

/// Resolves "F->X", "F~~G" or "Xa~~Xb" against a spec.
inline ParamAddress parse_param_address(const ModelSpec& spec, std::string_view text, std::size_t line = 0) {
    text = detail::trim(text);
    if (auto pos = text.find("->"); pos != std::string_view::npos) {
        std::string f(detail::trim(text.substr(0, pos))), x(detail::trim(text.substr(pos + 2)));
        if (!spec.has_factor(f)) throw ModelError("unknown factor '" + f + "'", line);
        if (!spec.has_indicator(x)) throw ModelError("unknown indicator '" + x + "'", line);
        if (spec.factor_of(spec.indicator_index(x)) != spec.factor_index(f))
            throw ModelError("'" + x + "' does not load on '" + f + "'", line);
        return ParamAddress::loading(f, x);
    }
    if (auto pos = text.find("~~"); pos != std::string_view::npos) {
        std::string a(detail::trim(text.substr(0, pos))), b(detail::trim(text.substr(pos + 2)));
        if (spec.has_factor(a) && spec.has_factor(b)) return ParamAddress::latent(a, b);
        if (spec.has_indicator(a) && spec.has_indicator(b)) {
            if (a != b) {
                auto i = spec.indicator_index(a), j = spec.indicator_index(b);
                auto key = std::pair{std::min(i, j), std::max(i, j)};
                auto& rc = spec.residual_covariances();
                if (std::find(rc.begin(), rc.end(), key) == rc.end())
                    throw ModelError("residual covariance " + a + " ~~ " + b + " is not a model parameter", line);
            }
            return ParamAddress::residual(a, b);
        }
        throw ModelError("unknown parameter '" + std::string(text) + "'", line);
    }
    throw ModelError("expected parameter of the form F->X or A~~B, got '" + std::string(text) + "'", line);
}

/// Builds the effects-coding constraint for one factor: the factor's loadings
/// sum to its indicator count, i.e. their mean is 1.
inline Constraint effects_coding_constraint(const ModelSpec& spec, std::size_t factor) {
    std::vector<ConstraintTerm> terms;
    auto inds = spec.indicators_of(factor);
    for (auto i : inds) terms.push_back({ParamAddress::loading(spec.factors()[factor], spec.indicators()[i]), 1.0});
    return Constraint::linear_sum(std::move(terms), static_cast<double>(inds.size()));
}

/// Parses a constraints file:
///
///     fix F->X = 1.0
///     equal F->X, G->Y
///     effects F
inline std::vector<Constraint> parse_constraints(const ModelSpec& spec, std::string_view text) {
    std::vector<Constraint> out;
    std::size_t lineno = 0;
    for (auto raw : detail::split(text, '\n')) {
        ++lineno;
        auto line = detail::trim(detail::strip_comment(raw));
        if (line.empty()) continue;
        auto sp = line.find_first_of(" \t");
        auto keyword = line.substr(0, sp);
        if (!keyword.empty() && keyword.back() == ':') keyword.remove_suffix(1);
        auto rest = sp == std::string_view::npos ? std::string_view{} : detail::trim(line.substr(sp));
        if (keyword == "fix") {
            auto eq = rest.rfind('=');
            if (eq == std::string_view::npos || eq == 0 || rest[eq - 1] == '~')
                throw ModelError("expected 'fix <param> = <value>'", lineno);
            auto param = parse_param_address(spec, rest.substr(0, eq), lineno);
            std::string value(detail::trim(rest.substr(eq + 1)));
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(value, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != value.size()) throw ModelError("invalid number '" + value + "'", lineno);
            out.push_back(Constraint::fix(std::move(param), v));
        } else if (keyword == "equal") {
            auto parts = detail::split(rest, ',');
            if (parts.size() != 2) throw ModelError("expected 'equal <param>, <param>'", lineno);
            out.push_back(Constraint::equal(parse_param_address(spec, parts[0], lineno),
                                            parse_param_address(spec, parts[1], lineno)));
        } else if (keyword == "effects") {
            std::string f(rest);
            if (!spec.has_factor(f)) throw ModelError("unknown factor '" + f + "'", lineno);
            out.push_back(effects_coding_constraint(spec, spec.factor_index(f)));
        } else {
            throw ModelError("unknown constraint keyword '" + std::string(keyword) + "'", lineno);
        }
    }
    return out;
}

} // namespace scalecheck

#endif // SCALECHECK_MODEL_HPP
