#ifndef SCALECHECK_CLI_HPP
#define SCALECHECK_CLI_HPP

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scalecheck/auditor.hpp"
#include "scalecheck/estimator.hpp"
#include "scalecheck/fitstats.hpp"
#include "scalecheck/interpretation.hpp"
#include "scalecheck/model.hpp"
#include "scalecheck/parameter_index.hpp"
#include "scalecheck/scaling.hpp"

namespace scalecheck::cli {

using json = nlohmann::ordered_json;

enum ExitCode { Ok = 0, BadInput = 2, NoConvergence = 3 };

/// Unreadable or malformed input; the message names the file.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::string covariance_path;
    std::size_t n = 0;
    std::string model_path;
    std::string constraints_path;
    std::optional<std::string> scaling;
    double alpha = 0.05;
    std::string format = "text";
    std::string out_path;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CovarianceInput {
    std::vector<std::string> names;  // empty when the file has no header row
    Eigen::MatrixXd matrix;
};

namespace detail {

inline std::vector<std::string> tokens(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::optional<double> number(const std::string& s) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

} // namespace detail

/// Plain numeric matrix, comma or whitespace separated, full or lower
/// triangle, optionally preceded by a row of indicator names.
inline CovarianceInput parse_covariance(std::string_view text, const std::string& source = "covariance") {
    CovarianceInput out;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    for (auto raw : scalecheck::detail::split(text, '\n')) {
        ++lineno;
        auto toks = detail::tokens(scalecheck::detail::strip_comment(raw));
        if (toks.empty()) continue;
        if (rows.empty() && out.names.empty() && !detail::number(toks[0])) {
            for (const auto& t : toks)
                if (!scalecheck::detail::is_identifier(t))
                    throw InputError(source + ":" + std::to_string(lineno) + ": invalid indicator name '" + t + "'");
            out.names = toks;
            continue;
        }
        std::vector<double> row;
        for (const auto& t : toks) {
            auto v = detail::number(t);
            if (!v) throw InputError(source + ":" + std::to_string(lineno) + ": '" + t + "' is not a number");
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    const auto p = rows.size();
    if (p == 0) throw InputError(source + ": no matrix rows");
    bool full = true, lower = true;
    for (std::size_t i = 0; i < p; ++i) {
        full = full && rows[i].size() == p;
        lower = lower && rows[i].size() == i + 1;
    }
    if (!full && !lower)
        throw InputError(source + ": rows must form a full " + std::to_string(p) + "x" + std::to_string(p) +
                         " matrix or its lower triangle");
    if (!out.names.empty() && out.names.size() != p)
        throw InputError(source + ": header names " + std::to_string(out.names.size()) + " indicators but the matrix has " +
                         std::to_string(p) + " rows");
    out.matrix.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            out.matrix(a, b) = rows[i][j];
            out.matrix(b, a) = full ? rows[j][i] : rows[i][j];
        }
    if (full) {
        const double scale = std::max(1.0, out.matrix.cwiseAbs().maxCoeff());
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(rows[i][j] - rows[j][i]) > 1e-10 * scale)
                    throw InputError(source + ": matrix is not symmetric at (" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ")");
    }
    return out;
}

/// Matrix in the model's indicator order.
inline Eigen::MatrixXd align_covariance(const CovarianceInput& cov, const ModelSpec& spec,
                                        const std::string& source = "covariance") {
    const auto p = static_cast<std::size_t>(cov.matrix.rows());
    if (p != spec.num_indicators())
        throw InputError(source + ": matrix is " + std::to_string(p) + "x" + std::to_string(p) + " but the model has " +
                         std::to_string(spec.num_indicators()) + " indicators");
    if (cov.names.empty()) return cov.matrix;
    std::vector<Eigen::Index> pos(p);
    std::vector<bool> seen(p, false);
    for (std::size_t k = 0; k < p; ++k) {
        if (!spec.has_indicator(cov.names[k]))
            throw InputError(source + ": header name '" + cov.names[k] + "' is not an indicator of the model");
        const auto i = spec.indicator_index(cov.names[k]);
        if (seen[i]) throw InputError(source + ": header repeats '" + cov.names[k] + "'");
        seen[i] = true;
        pos[i] = static_cast<Eigen::Index>(k);
    }
    Eigen::MatrixXd s(cov.matrix.rows(), cov.matrix.cols());
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov.matrix(pos[i], pos[j]);
    return s;
}

struct Inputs {
    ModelSpec spec;
    SampleMoments moments;
    std::vector<Constraint> constraints;
};

inline Inputs load_inputs(const RunConfig& cfg) {
    if (cfg.n < 2) throw InputError("--n must be at least 2");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw InputError("--alpha must lie in (0, 1)");
    auto wrap = [](const std::string& path, auto&& f) {
        try {
            return f();
        } catch (const InputError&) {
            throw;
        } catch (const std::exception& e) {
            throw InputError(path + ": " + e.what());
        }
    };
    auto spec = wrap(cfg.model_path, [&] { return parse_model_spec(read_file(cfg.model_path)); });
    auto cov = parse_covariance(read_file(cfg.covariance_path), cfg.covariance_path);
    auto s = align_covariance(cov, spec, cfg.covariance_path);
    auto moments = wrap(cfg.covariance_path, [&] { return SampleMoments(s, cfg.n); });
    std::vector<Constraint> cons;
    if (!cfg.constraints_path.empty())
        cons = wrap(cfg.constraints_path, [&] { return parse_constraints(spec, read_file(cfg.constraints_path)); });
    return {std::move(spec), std::move(moments), std::move(cons)};
}

/// Fixed 5-decimal rendering; negative zero prints as zero.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.5f", v);
    std::string s(buf);
    if (s == "-0.00000") s = "0.00000";
    return s;
}

namespace detail {

inline bool numeric_cell(const std::string& s) {
    return s.empty() || s == "-" || s == "nan" || s == "undefined" || number(s).has_value();
}

/// Columns whose cells (after the first row) are all numeric are right-aligned.
inline void print_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows, const std::string& indent = "  ") {
    std::vector<std::size_t> w;
    std::vector<bool> right;
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t c = 0; c < rows[k].size(); ++c) {
            if (w.size() <= c) {
                w.push_back(0);
                right.push_back(c > 0);
            }
            w[c] = std::max(w[c], rows[k][c].size());
            if (k > 0 && !numeric_cell(rows[k][c])) right[c] = false;
        }
    for (const auto& r : rows) {
        std::string line = indent;
        for (std::size_t c = 0; c < r.size(); ++c) {
            const auto pad = std::string(w[c] - r[c].size(), ' ');
            line += (c ? "  " : "") + (right[c] ? pad + r[c] : r[c] + pad);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        os << line << '\n';
    }
}

inline json rmsea_json(const FitStatistics& s) { return s.rmsea_defined ? json(s.rmsea) : json(nullptr); }

inline json stats_json(const FitStatistics& s) {
    return {{"chi_square", s.chi_square}, {"df", s.df}, {"p_value", s.p_value},
            {"cfi", s.cfi},               {"rmsea", rmsea_json(s)}, {"srmr", s.srmr}};
}

inline json difference_json(const DifferenceStatistics& d) {
    return {{"delta_chi_square", d.delta_chi_square}, {"delta_df", d.delta_df}, {"p_value", d.p_value},
            {"delta_cfi", d.delta_cfi},               {"delta_rmsea", d.delta_rmsea}, {"delta_srmr", d.delta_srmr}};
}

inline std::string status_of(const ParameterIndex& index, std::size_t k) {
    if (index.is_fixed(k)) return "fixed";
    const auto& fr = index.free_positions();
    return std::find(fr.begin(), fr.end(), k) != fr.end() ? "free" : "constrained";
}

inline json interpretation_json(const std::vector<InterpretationEntry>& entries) {
    json arr = json::array();
    for (const auto& e : entries) {
        json ref = json::array();
        for (const auto& r : e.reference) ref.push_back(r.to_string());
        arr.push_back({{"parameter", e.parameter.to_string()},
                       {"transformation", to_string(e.transformation)},
                       {"reference", ref},
                       {"formula", e.formula},
                       {"text", e.rendered_text}});
    }
    return arr;
}

inline void print_interpretation(std::ostream& os, const std::vector<InterpretationEntry>& entries) {
    std::vector<std::vector<std::string>> rows{{"parameter", "estimates", "formula"}};
    for (const auto& e : entries) rows.push_back({e.parameter.to_string(), to_string(e.transformation), e.formula});
    print_table(os, rows);
    for (const auto& e : entries) os << "  " << e.parameter.to_string() << ": " << e.rendered_text << '\n';
}

struct FittedScaling {
    ScalingMethod scaling;
    std::string name;
    ParameterIndex index;
    ParameterEstimate estimate;
    int df = 0;
};

inline FittedScaling fit_scaling(const Inputs& in, const ScalingMethod& scaling) {
    auto index = compile_constraints(in.spec, with_scaling(in.spec, scaling, in.constraints));
    const int df = degrees_of_freedom(in.spec, index);
    auto est = fit(in.moments, in.spec, index);
    return {scaling, scaling_name(in.spec, scaling), std::move(index), std::move(est), df};
}

} // namespace detail

inline void cmd_fit(const RunConfig& cfg, const Inputs& in, std::ostream& os) {
    const auto scaling = parse_scaling(in.spec, cfg.scaling.value_or("fixed-marker"));
    const auto r = detail::fit_scaling(in, scaling);
    const auto baseline = fit_baseline(in.moments);
    const auto stats = compute_fit_statistics(in.moments, r.estimate, r.df, baseline);
    const auto entries = interpretation_report(in.spec, scaling);
    const auto& layout = r.index.layout();

    if (cfg.format == "json") {
        json params = json::array();
        for (std::size_t k = 0; k < layout.size(); ++k)
            params.push_back({{"parameter", layout[k].to_string()},
                              {"estimate", r.estimate.full[static_cast<Eigen::Index>(k)]},
                              {"status", detail::status_of(r.index, k)}});
        json doc = {{"command", "fit"},
                    {"scaling", r.name},
                    {"n", in.moments.n()},
                    {"free_parameters", r.index.reduced_size()},
                    {"iterations", r.estimate.iterations},
                    {"discrepancy", r.estimate.discrepancy},
                    {"parameters", params},
                    {"fit", detail::stats_json(stats)},
                    {"baseline", {{"chi_square", baseline.chi_square}, {"df", baseline.df}}},
                    {"interpretation", detail::interpretation_json(entries)}};
        os << doc.dump(2) << '\n';
        return;
    }

    os << "Scaling: " << r.name << "    N = " << in.moments.n() << "    free parameters = " << r.index.reduced_size()
       << "    iterations = " << r.estimate.iterations << "\n\nParameter estimates\n";
    std::vector<std::vector<std::string>> rows{{"parameter", "estimate", "status"}};
    for (std::size_t k = 0; k < layout.size(); ++k)
        rows.push_back({layout[k].to_string(), fmt(r.estimate.full[static_cast<Eigen::Index>(k)]), detail::status_of(r.index, k)});
    detail::print_table(os, rows);
    os << "\nFit statistics\n";
    detail::print_table(os, {{"chi-square", fmt(stats.chi_square)},
                             {"df", std::to_string(stats.df)},
                             {"p-value", fmt(stats.p_value)},
                             {"CFI", fmt(stats.cfi)},
                             {"RMSEA", stats.rmsea_defined ? fmt(stats.rmsea) : "-"},
                             {"SRMR", fmt(stats.srmr)},
                             {"baseline chi-square", fmt(baseline.chi_square)},
                             {"baseline df", std::to_string(baseline.df)}});
    os << "\nInterpretation\n";
    detail::print_interpretation(os, entries);
}

inline Constraint split_tested(const ModelSpec& spec, std::vector<Constraint>& cons) {
    std::optional<Constraint> tested;
    std::vector<Constraint> rest;
    for (auto& c : cons) {
        bool cross = c.kind == ConstraintKind::Equal && c.terms.size() == 2 &&
                     c.terms[0].param.kind == ParamKind::Loading && c.terms[1].param.kind == ParamKind::Loading &&
                     spec.factor_index(c.terms[0].param.first) != spec.factor_index(c.terms[1].param.first);
        if (!cross) {
            rest.push_back(std::move(c));
            continue;
        }
        if (tested) throw InputError("audit takes exactly one 'equal' between loadings of different factors");
        tested = std::move(c);
    }
    if (!tested) throw InputError("audit needs an 'equal' constraint between loadings of different factors");
    cons = std::move(rest);
    return *tested;
}

inline void cmd_audit(const RunConfig& cfg, Inputs& in, std::ostream& os) {
    if (cfg.constraints_path.empty()) throw InputError("audit needs --constraints with the tested 'equal' line");
    const auto tested = split_tested(in.spec, in.constraints);
    const auto report = audit(in.moments, in.spec, tested, cfg.alpha, in.constraints);

    if (cfg.format == "json") {
        json recs = json::array();
        for (const auto& r : report.records)
            recs.push_back({{"scaling", r.name},
                            {"unrestricted", detail::stats_json(r.unrestricted)},
                            {"restricted", detail::stats_json(r.restricted)},
                            {"difference", detail::difference_json(r.difference)},
                            {"decision", to_string(r.decision)},
                            {"tested_hypothesis", {{"lhs", r.hypothesis.lhs}, {"rhs", r.hypothesis.rhs}, {"ratio_form", r.hypothesis.ratio_form}}}});
        json div = json::array();
        for (const auto& d : report.divergence) div.push_back({{"term", d.label}, {"value", d.value}});
        json eq = json::array();
        for (const auto& e : report.equivalences)
            eq.push_back({{"first", scaling_name(in.spec, e.first)}, {"second", scaling_name(in.spec, e.second)}, {"reason", e.reason}});
        json doc = {{"command", "audit"},
                    {"tested", tested.to_string()},
                    {"alpha", report.alpha},
                    {"n", in.moments.n()},
                    {"baseline", {{"chi_square", report.baseline.chi_square}, {"df", report.baseline.df}}},
                    {"records", recs},
                    {"interaction_detected", report.interaction_detected},
                    {"min_delta_chi_square", report.min_delta_chi_square},
                    {"max_delta_chi_square", report.max_delta_chi_square},
                    {"divergence", div},
                    {"equivalences", eq}};
        os << doc.dump(2) << '\n';
        return;
    }

    os << "Tested constraint: " << tested.to_string() << "    N = " << in.moments.n() << "    alpha = " << report.alpha << "\n\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{""};
    for (const auto& r : report.records) head.push_back(r.name);
    rows.push_back(head);
    auto block = [&](const std::string& title, auto get) {
        rows.push_back({title});
        for (const auto& [label, f] : get) {
            std::vector<std::string> row{"  " + label};
            for (const auto& r : report.records) row.push_back(f(r));
            rows.push_back(row);
        }
    };
    using Getter = std::function<std::string(const AuditRecord&)>;
    auto stats_rows = [](const FitStatistics AuditRecord::*m) {
        return std::vector<std::pair<std::string, Getter>>{
            {"chi-square", [m](const AuditRecord& r) { return fmt((r.*m).chi_square); }},
            {"df", [m](const AuditRecord& r) { return std::to_string((r.*m).df); }},
            {"p-value", [m](const AuditRecord& r) { return fmt((r.*m).p_value); }},
            {"CFI", [m](const AuditRecord& r) { return fmt((r.*m).cfi); }},
            {"RMSEA", [m](const AuditRecord& r) { return (r.*m).rmsea_defined ? fmt((r.*m).rmsea) : std::string("-"); }},
            {"SRMR", [m](const AuditRecord& r) { return fmt((r.*m).srmr); }}};
    };
    block("Unrestricted", stats_rows(&AuditRecord::unrestricted));
    block("Restricted", stats_rows(&AuditRecord::restricted));
    block("Difference", std::vector<std::pair<std::string, Getter>>{
                            {"delta chi-square", [](const AuditRecord& r) { return fmt(r.difference.delta_chi_square); }},
                            {"delta df", [](const AuditRecord& r) { return std::to_string(r.difference.delta_df); }},
                            {"p-value", [](const AuditRecord& r) { return fmt(r.difference.p_value); }},
                            {"delta CFI", [](const AuditRecord& r) { return fmt(r.difference.delta_cfi); }},
                            {"delta RMSEA", [](const AuditRecord& r) { return fmt(r.difference.delta_rmsea); }},
                            {"delta SRMR", [](const AuditRecord& r) { return fmt(r.difference.delta_srmr); }}});
    std::vector<std::string> dec{"Decision"};
    for (const auto& r : report.records) dec.push_back(to_string(r.decision));
    rows.push_back(dec);
    detail::print_table(os, rows);

    os << "\nHypothesis actually tested\n";
    for (const auto& r : report.records)
        os << "  " << r.name << ": " << r.hypothesis.lhs << " = " << r.hypothesis.rhs << "\n      equivalently "
           << r.hypothesis.ratio_form << '\n';

    os << "\nDivergence diagnostics (values far from 1 favour interaction)\n";
    std::vector<std::vector<std::string>> drows;
    for (const auto& d : report.divergence) drows.push_back({d.label, fmt(d.value)});
    detail::print_table(os, drows);
    os << "  delta chi-square range: " << fmt(report.min_delta_chi_square) << " to " << fmt(report.max_delta_chi_square)
       << '\n';

    if (!report.equivalences.empty()) {
        os << "\nEquivalent hypotheses\n";
        for (const auto& e : report.equivalences)
            os << "  " << scaling_name(in.spec, e.first) << " == " << scaling_name(in.spec, e.second) << " (" << e.reason
               << ")\n";
    }
    os << '\n'
       << (report.interaction_detected ? "INTERACTION DETECTED: the decision depends on the scaling method"
                                       : "No interaction: every scaling reaches the same decision")
       << '\n';
}

inline void cmd_interpret(const RunConfig& cfg, const Inputs& in, std::ostream& os) {
    std::vector<ScalingMethod> scalings;
    if (cfg.scaling) scalings.push_back(parse_scaling(in.spec, *cfg.scaling));
    else scalings = enumerate_scalings(in.spec);

    std::vector<detail::FittedScaling> fits;
    std::vector<std::pair<std::string, std::string>> skipped;
    for (const auto& s : scalings) {
        try {
            fits.push_back(detail::fit_scaling(in, s));
        } catch (const ConstraintError& e) {
            skipped.emplace_back(scaling_name(in.spec, s), e.what());
        }
    }
    if (fits.empty()) throw InputError("no scaling is compatible with the given constraints");

    std::vector<std::vector<InvariantCombination>> combos;
    for (const auto& f : fits) combos.push_back(invariant_combinations(f.estimate, in.spec));

    if (cfg.format == "json") {
        json sc = json::array();
        for (const auto& f : fits) {
            json free = json::array();
            for (auto k : f.index.free_positions()) free.push_back(f.index.layout()[k].to_string());
            sc.push_back({{"scaling", f.name}, {"free_parameters", free},
                          {"interpretation", detail::interpretation_json(interpretation_report(in.spec, f.scaling))}});
        }
        json cb = json::array();
        for (std::size_t c = 0; c < combos.front().size(); ++c) {
            json vals = json::object();
            for (std::size_t k = 0; k < fits.size(); ++k)
                vals[fits[k].name] = combos[k][c].defined ? json(combos[k][c].value) : json(nullptr);
            cb.push_back({{"combination", combos.front()[c].label}, {"values", vals}});
        }
        json sk = json::array();
        for (const auto& [n, why] : skipped) sk.push_back({{"scaling", n}, {"reason", why}});
        os << json{{"command", "interpret"}, {"scalings", sc}, {"combinations", cb}, {"skipped", sk}}.dump(2) << '\n';
        return;
    }

    for (const auto& f : fits) {
        os << "Scaling: " << f.name << "\n  free parameters:";
        if (f.index.free_positions().empty()) os << " (none)";
        for (auto k : f.index.free_positions()) os << ' ' << f.index.layout()[k].to_string();
        os << '\n';
        detail::print_interpretation(os, interpretation_report(in.spec, f.scaling));
        os << '\n';
    }
    for (const auto& [n, why] : skipped) os << "Scaling " << n << " skipped: " << why << '\n';
    os << "Scaling-invariant combinations\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{"combination"};
    for (const auto& f : fits) head.push_back(f.name);
    rows.push_back(head);
    for (std::size_t c = 0; c < combos.front().size(); ++c) {
        std::vector<std::string> row{combos.front()[c].label};
        for (std::size_t k = 0; k < fits.size(); ++k) row.push_back(combos[k][c].defined ? fmt(combos[k][c].value) : "undefined");
        rows.push_back(row);
    }
    detail::print_table(os, rows);
}

/// Executes a parsed configuration; returns the process exit code.
inline int run(RunConfig cfg, std::ostream& out, std::ostream& err) {
    try {
        if (cfg.format != "text" && cfg.format != "json") throw InputError("--format must be text or json");
        auto in = load_inputs(cfg);
        std::ostringstream buf;
        if (cfg.command == "fit") cmd_fit(cfg, in, buf);
        else if (cfg.command == "audit") cmd_audit(cfg, in, buf);
        else if (cfg.command == "interpret") cmd_interpret(cfg, in, buf);
        else throw InputError("unknown command '" + cfg.command + "'");
        if (cfg.out_path.empty()) {
            out << buf.str();
        } else {
            std::ofstream f(cfg.out_path, std::ios::binary);
            if (!f) throw InputError("cannot write '" + cfg.out_path + "'");
            f << buf.str();
        }
        return Ok;
    } catch (const EstimationError& e) {
        err << "error: " << e.what() << '\n';
        return NoConvergence;
    } catch (const NestingError& e) {
        err << "error: " << e.what() << '\n';
        return NoConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return BadInput;
    }
}

/// Parses argv-style arguments (args[0] is the program name) and runs.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Scaling audit for confirmatory factor models", "scalecheck"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string scaling;
    std::vector<CLI::Option*> scaling_opts;
    const std::pair<const char*, const char*> commands[] = {
        {"fit", "fit the model under one scaling"},
        {"audit", "test a cross-factor loading equality under every scaling"},
        {"interpret", "show what each parameter means and the scaling-invariant combinations"}};
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        sub->add_option("--cov", cfg.covariance_path, "covariance matrix file")->required();
        sub->add_option("--n", cfg.n, "sample size")->required();
        sub->add_option("--model", cfg.model_path, "model file")->required();
        sub->add_option("--constraints", cfg.constraints_path, "constraints file");
        if (std::string_view(name) != "audit")
            scaling_opts.push_back(sub->add_option("--scaling", scaling, "fixed-marker, marker-<k>, fixed-factor or effects-coding"));
        sub->add_option("--alpha", cfg.alpha, "significance level")->capture_default_str();
        sub->add_option("--format", cfg.format, "text or json")->capture_default_str();
        sub->add_option("--out", cfg.out_path, "write the report to a file");
    }
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return BadInput;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    for (auto* o : scaling_opts)
        if (o->count()) cfg.scaling = scaling;
    return run(std::move(cfg), out, err);
}

} // namespace scalecheck::cli

#endif // SCALECHECK_CLI_HPP
