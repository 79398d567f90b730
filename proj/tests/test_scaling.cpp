#include <catch_amalgamated.hpp>

#include "fixtures.hpp"

using namespace scalecheck;

TEST_CASE("scaling names parse and print") {
    auto spec = fixtures::spec2();
    REQUIRE(scaling_name(spec, parse_scaling(spec, "fixed-marker")) == "marker-1");
    REQUIRE(scaling_name(spec, parse_scaling(spec, "marker")) == "marker-1");
    REQUIRE(scaling_name(spec, parse_scaling(spec, "marker-3")) == "marker-3");
    REQUIRE(scaling_name(spec, parse_scaling(spec, "fixed-factor")) == "fixed-factor");
    REQUIRE(scaling_name(spec, parse_scaling(spec, "effects")) == "effects-coding");
    REQUIRE_THROWS(parse_scaling(spec, "marker-0"));
    REQUIRE_THROWS(parse_scaling(spec, "marker-5"));
    REQUIRE_THROWS(parse_scaling(spec, "marker-x"));
    REQUIRE_THROWS(parse_scaling(spec, "standardized"));

    FixedMarker mixed{{"X11", "X32"}};
    REQUIRE(scaling_name(spec, mixed) == "marker(X11,X32)");
    REQUIRE_FALSE(common_marker_position(spec, mixed).has_value());
}

TEST_CASE("each scaling contributes one constraint per factor") {
    auto spec = fixtures::spec2();
    auto fm = scaling_constraints(spec, marker_at_position(spec, 2));
    REQUIRE(fm.size() == 2);
    REQUIRE(fm[0].terms[0].param == ParamAddress::loading("A1", "X31"));
    REQUIRE(fm[1].terms[0].param == ParamAddress::loading("A2", "X32"));
    REQUIRE(fm[0].target == 1.0);

    auto ff = scaling_constraints(spec, FixedFactor{});
    REQUIRE(ff[1].terms[0].param == ParamAddress::latent("A2", "A2"));

    auto ec = scaling_constraints(spec, EffectsCoding{});
    REQUIRE(ec[0].terms.size() == 4);
    REQUIRE(ec[0].target == 4.0);
}

TEST_CASE("markers must belong to their factor") {
    auto spec = fixtures::spec1();
    REQUIRE_THROWS_AS(scaling_constraints(spec, FixedMarker{{"X3", "X1"}}), ModelError);
    REQUIRE_THROWS_AS(scaling_constraints(spec, FixedMarker{{"X1"}}), ModelError);
}

TEST_CASE("enumeration skips marker positions used by the tested loadings") {
    auto s1 = fixtures::spec1();
    std::vector<std::string> names;
    for (const auto& s : enumerate_scalings(s1, fixtures::tested1())) names.push_back(scaling_name(s1, s));
    REQUIRE(names == std::vector<std::string>{"marker-1", "fixed-factor", "effects-coding"});

    auto s2 = fixtures::spec2();
    names.clear();
    for (const auto& s : enumerate_scalings(s2, fixtures::tested2())) names.push_back(scaling_name(s2, s));
    REQUIRE(names == std::vector<std::string>{"marker-1", "marker-3", "marker-4", "fixed-factor", "effects-coding"});

    REQUIRE(enumerate_scalings(s2).size() == 6);
    REQUIRE_THROWS(enumerate_scalings(s2, Constraint::fix(ParamAddress::loading("A1", "X11"), 1.0)));
}

TEST_CASE("unequal factor sizes limit the shared marker positions") {
    auto spec = parse_model_spec("A =~ a1 + a2 + a3\nB =~ b1 + b2");
    REQUIRE(enumerate_scalings(spec).size() == 4);
    REQUIRE_THROWS_AS(marker_at_position(spec, 2), ModelError);
}

TEST_CASE("hand-written duplicates of scaling constraints are merged") {
    auto spec = fixtures::spec1();
    std::vector<Constraint> extra{Constraint::fix(ParamAddress::loading("A", "X1"), 1.0),
                                  Constraint::fix(ParamAddress::latent("A", "B"), 0.5)};
    auto merged = with_scaling(spec, marker_at_position(spec, 0), extra);
    REQUIRE(merged.size() == 3);
    REQUIRE_NOTHROW(compile_constraints(spec, merged));
    REQUIRE(with_scaling(spec, FixedFactor{}, extra).size() == 4);
}
