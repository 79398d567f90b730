#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"

using namespace scalecheck;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("layout orders loadings, latent lower triangle, residual variances, residual covariances") {
    auto layout = parameter_layout(fixtures::spec1());
    REQUIRE(layout.size() == 11);
    REQUIRE(layout[0] == ParamAddress::loading("A", "X1"));
    REQUIRE(layout[3] == ParamAddress::loading("B", "X4"));
    REQUIRE(layout[4] == ParamAddress::latent("A", "A"));
    REQUIRE(layout[5] == ParamAddress::latent("A", "B"));
    REQUIRE(layout[5].to_string() == "A~~B");
    REQUIRE(layout[6] == ParamAddress::latent("B", "B"));
    REQUIRE(layout[7] == ParamAddress::residual("X1", "X1"));

    auto layout2 = parameter_layout(fixtures::spec2());
    REQUIRE(layout2.size() == 8 + 3 + 8 + 4);
    REQUIRE(layout2.back() == ParamAddress::residual("X41", "X42"));
}

TEST_CASE("marker scaling leaves one df in example 1 and fifteen in example 2") {
    auto s1 = fixtures::spec1();
    auto i1 = compile_constraints(s1, scaling_constraints(s1, marker_at_position(s1, 0)));
    REQUIRE(i1.reduced_size() == 9);
    REQUIRE(degrees_of_freedom(s1, i1) == 1);
    REQUIRE(i1.is_fixed(0));
    REQUIRE_FALSE(i1.is_fixed(1));

    auto s2 = fixtures::spec2();
    auto i2 = compile_constraints(s2, scaling_constraints(s2, EffectsCoding{}));
    REQUIRE(i2.reduced_size() == 21);
    REQUIRE(degrees_of_freedom(s2, i2) == 15);
}

TEST_CASE("expand honours fixed values, equalities and sums") {
    auto spec = fixtures::spec1();
    std::vector<Constraint> cs{Constraint::fix(ParamAddress::loading("A", "X1"), 1.0),
                               Constraint::equal(ParamAddress::loading("A", "X2"), ParamAddress::loading("B", "X4")),
                               effects_coding_constraint(spec, 1)};
    auto idx = compile_constraints(spec, cs);
    REQUIRE(idx.reduced_size() == 8);
    Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(8, 0.3, 2.1);
    auto full = idx.expand(r);
    REQUIRE(full[0] == 1.0);
    REQUIRE(full[1] == Catch::Approx(full[3]));
    REQUIRE(full[2] + full[3] == Catch::Approx(2.0));
    REQUIRE(idx.constraint_violation(full) < 1e-12);
    REQUIRE((idx.reduce(full) - r).norm() < 1e-12);
}

TEST_CASE("inconsistent constraints are rejected") {
    auto spec = fixtures::spec1();
    std::vector<Constraint> cs{Constraint::fix(ParamAddress::loading("A", "X1"), 1.0),
                               Constraint::fix(ParamAddress::loading("A", "X1"), 2.0)};
    REQUIRE_THROWS_WITH(compile_constraints(spec, cs), ContainsSubstring("inconsistent"));

    std::vector<Constraint> chain{Constraint::fix(ParamAddress::loading("A", "X1"), 1.0),
                                  Constraint::equal(ParamAddress::loading("A", "X1"), ParamAddress::loading("A", "X2")),
                                  Constraint::fix(ParamAddress::loading("A", "X2"), 3.0)};
    REQUIRE_THROWS_WITH(compile_constraints(spec, chain), ContainsSubstring("inconsistent"));
}

TEST_CASE("redundant constraints are rejected") {
    auto spec = fixtures::spec1();
    std::vector<Constraint> cs{Constraint::fix(ParamAddress::loading("A", "X1"), 1.0),
                               Constraint::fix(ParamAddress::loading("A", "X1"), 1.0)};
    REQUIRE_THROWS_WITH(compile_constraints(spec, cs), ContainsSubstring("redundant"));
}

TEST_CASE("unknown parameters and empty constraints are rejected") {
    auto spec = fixtures::spec1();
    REQUIRE_THROWS_AS(compile_constraints(spec, {Constraint::fix(ParamAddress::loading("A", "X3"), 1.0)}), ConstraintError);
    REQUIRE_THROWS_AS(compile_constraints(spec, {Constraint::linear_sum({}, 0.0)}), ConstraintError);
}

TEST_CASE("a model with more free parameters than moments is not estimable") {
    auto spec = parse_model_spec("A =~ X1 + X2");
    auto idx = compile_constraints(spec, scaling_constraints(spec, FixedFactor{}));
    REQUIRE(idx.reduced_size() == 4);
    REQUIRE_THROWS_AS(degrees_of_freedom(spec, idx), ConstraintError);
}

TEST_CASE("projection lands on the feasible set and keeps feasible points") {
    auto spec = fixtures::spec2();
    auto idx = compile_constraints(spec, scaling_constraints(spec, EffectsCoding{}));
    Eigen::VectorXd any = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(idx.full_size()), 0.7);
    auto r = idx.project(any);
    REQUIRE(idx.constraint_violation(idx.expand(r)) < 1e-12);
    Eigen::VectorXd feasible = idx.expand(r);
    REQUIRE((idx.expand(idx.project(feasible)) - feasible).norm() < 1e-10);
}

TEST_CASE("random constraint systems compile to an exact parameterization") {
    std::mt19937 rng(20240607);
    auto spec = fixtures::spec2();
    const auto layout = parameter_layout(spec);
    const int n = static_cast<int>(layout.size());
    std::uniform_int_distribution<int> pick(0, n - 1), kind(0, 2), count(1, 8);
    std::uniform_real_distribution<double> val(-3.0, 3.0);
    int compiled = 0, rejected = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Constraint> cs;
        const int m = count(rng);
        for (int c = 0; c < m; ++c) {
            const auto& a = layout[static_cast<std::size_t>(pick(rng))];
            const auto& b = layout[static_cast<std::size_t>(pick(rng))];
            switch (kind(rng)) {
            case 0: cs.push_back(Constraint::fix(a, val(rng))); break;
            case 1: cs.push_back(Constraint::equal(a, b)); break;
            default: cs.push_back(Constraint::linear_sum({{a, val(rng)}, {b, val(rng)}}, val(rng)));
            }
        }
        // Oracle for solvability: rank of C against rank of [C | d].
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, n);
        Eigen::VectorXd d(m);
        for (int row = 0; row < m; ++row) {
            for (const auto& t : cs[static_cast<std::size_t>(row)].terms)
                for (int k = 0; k < n; ++k)
                    if (layout[static_cast<std::size_t>(k)] == t.param) C(row, k) += t.coefficient;
            d[row] = cs[static_cast<std::size_t>(row)].target;
        }
        Eigen::MatrixXd aug(m, n + 1);
        aug << C, d;
        const auto rank = Eigen::FullPivLU<Eigen::MatrixXd>(C).setThreshold(1e-9).rank();
        const auto rank_aug = Eigen::FullPivLU<Eigen::MatrixXd>(aug).setThreshold(1e-9).rank();
        const bool well_posed = rank == m && rank_aug == m;

        try {
            auto idx = compile_constraints(spec, cs);
            REQUIRE(well_posed);
            ++compiled;
            REQUIRE(static_cast<int>(idx.reduced_size()) == n - m);
            REQUIRE(Eigen::FullPivLU<Eigen::MatrixXd>(idx.basis()).rank() == n - m);
            Eigen::VectorXd r = Eigen::VectorXd::NullaryExpr(n - m, [&] { return val(rng); });
            const Eigen::VectorXd full = idx.expand(r);
            REQUIRE((C * full - d).cwiseAbs().maxCoeff() < 1e-9);
            REQUIRE((idx.reduce(full) - r).norm() < 1e-12);
        } catch (const ConstraintError&) {
            REQUIRE_FALSE(well_posed);
            ++rejected;
        }
    }
    REQUIRE(compiled > 500);
    REQUIRE(rejected > 0);
}
