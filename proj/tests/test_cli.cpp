#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "scalecheck/cli.hpp"

using namespace scalecheck;
using namespace scalecheck::cli;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::string data_dir = SCALECHECK_DATA_DIR;

std::string data(const std::string& name) { return data_dir + "/" + name; }

std::string temp_file(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / ("scalecheck_test_" + name);
    std::ofstream(path) << content;
    return path.string();
}

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "scalecheck");
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> ex1(const std::string& cmd) {
    return {cmd, "--cov", data("example1_cov.csv"), "--n", "200", "--model", data("example1.model")};
}

std::vector<std::string> ex2(const std::string& cmd) {
    return {cmd, "--cov", data("example2_cov.txt"), "--n", "150", "--model", data("example2.model")};
}

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

} // namespace

TEST_CASE("covariance files: full, lower triangle, header, separators") {
    auto full = parse_covariance("a, b\n2, 1\n1, 3\n");
    REQUIRE(full.names == std::vector<std::string>{"a", "b"});
    REQUIRE(full.matrix(0, 1) == 1.0);
    auto lower = parse_covariance("# comment\n2\n1 3\n\n");
    REQUIRE(lower.names.empty());
    REQUIRE(lower.matrix == full.matrix);
    auto tabs = parse_covariance("2\t1\n1\t3");
    REQUIRE(tabs.matrix == full.matrix);
}

TEST_CASE("covariance file errors") {
    REQUIRE_THROWS_WITH(parse_covariance("2 1\n1.1 3\n", "m.txt"), ContainsSubstring("not symmetric"));
    REQUIRE_NOTHROW(parse_covariance("2 1\n1.00000000000001 3\n"));
    REQUIRE_THROWS_WITH(parse_covariance("2 1\n1 x\n", "m.txt"), ContainsSubstring("m.txt:2"));
    REQUIRE_THROWS_WITH(parse_covariance("2 1\n1\n"), ContainsSubstring("lower triangle"));
    REQUIRE_THROWS_WITH(parse_covariance("a b c\n2\n1 3\n"), ContainsSubstring("header"));
    REQUIRE_THROWS(parse_covariance("# only comments\n"));
}

TEST_CASE("header order is mapped onto model order") {
    auto spec = fixtures::spec1();
    auto cov = parse_covariance("X3 X1 X4 X2\n4\n3.2 25\n1.2 2 4\n2 7.2 1.25 9\n");
    REQUIRE(align_covariance(cov, spec) == fixtures::s1());
    auto bad = parse_covariance("X1 X2 X3 X9\n1\n0 1\n0 0 1\n0 0 0 1\n");
    REQUIRE_THROWS_WITH(align_covariance(bad, spec), ContainsSubstring("X9"));
    auto small = parse_covariance("1\n0 1\n0 0 1\n");
    REQUIRE_THROWS_WITH(align_covariance(small, spec), ContainsSubstring("3x3"));
}

TEST_CASE("number formatting") {
    REQUIRE(fmt(0.625) == "0.62500");
    REQUIRE(fmt(-1e-9) == "0.00000");
    REQUIRE(fmt(-0.120416) == "-0.12042");
}

TEST_CASE("fit with the default marker scaling") {
    auto r = run(ex1("fit"));
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("Scaling: marker-1"));
    REQUIRE_THAT(r.out, ContainsSubstring("A->X2       0.62500"));
    REQUIRE_THAT(r.out, ContainsSubstring("chi-square             0.00000"));
    REQUIRE_THAT(r.out, ContainsSubstring("df                           1"));
}

TEST_CASE("fit with fixed factor scaling prints the interpretation sentence") {
    auto r = run(ex1("fit") + std::vector<std::string>{"--scaling", "fixed-factor"});
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("3.39411"));
    REQUIRE_THAT(r.out, ContainsSubstring("product of X1's factor loading on A and A's standard deviation"));
}

TEST_CASE("input errors exit with status 2") {
    auto c3 = temp_file("c3.txt", "1 0 0\n0 1 0\n0 0 1\n");
    auto r = run({"fit", "--cov", c3, "--n", "200", "--model", data("example1.model")});
    REQUIRE(r.code == 2);
    REQUIRE_THAT(r.err, ContainsSubstring(c3));

    REQUIRE(run({"fit", "--cov", "/nonexistent/cov.txt", "--n", "200", "--model", data("example1.model")}).code == 2);
    REQUIRE(run(ex1("fit") + std::vector<std::string>{"--scaling", "nonsense"}).code == 2);
    REQUIRE(run(ex1("fit") + std::vector<std::string>{"--format", "xml"}).code == 2);
    REQUIRE(run({"fit", "--cov", data("example1_cov.csv"), "--n", "1", "--model", data("example1.model")}).code == 2);
    REQUIRE(run({"fit", "--n", "200"}).code == 2);
    REQUIRE(run({"bogus"}).code == 2);

    auto badmodel = temp_file("bad.model", "A =~ X1 + X2\nB =~ X2 + X3\n");
    auto rb = run({"fit", "--cov", data("example1_cov.csv"), "--n", "200", "--model", badmodel});
    REQUIRE(rb.code == 2);
    REQUIRE_THAT(rb.err, ContainsSubstring("line 2"));

    auto badcons = temp_file("bad.cons", "fix A->X1 = 1\nfix A->X1 = 2\n");
    REQUIRE(run(ex1("fit") + std::vector<std::string>{"--constraints", badcons}).code == 2);
}

TEST_CASE("audit of example 1 prints the grid and the banner") {
    auto r = run(ex1("audit") + std::vector<std::string>{"--constraints", data("example1_constraints.txt")});
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("14.08728"));
    REQUIRE_THAT(r.out, ContainsSubstring("0.00087"));
    REQUIRE_THAT(r.out, ContainsSubstring("-0.12042"));
    REQUIRE_THAT(r.out, ContainsSubstring("2.44949"));
    REQUIRE_THAT(r.out, ContainsSubstring("INTERACTION DETECTED"));
}

TEST_CASE("audit needs a cross-factor equality") {
    REQUIRE(run(ex1("audit")).code == 2);
    auto within = temp_file("within.cons", "equal A->X1, A->X2\n");
    REQUIRE(run(ex1("audit") + std::vector<std::string>{"--constraints", within}).code == 2);
}

TEST_CASE("audit at alpha 0.01 accepts under fixed factor in example 2") {
    auto args = ex2("audit") + std::vector<std::string>{"--constraints", data("example2_constraints.txt"), "--format", "json"};
    auto r5 = run(args);
    REQUIRE(r5.code == 0);
    auto j5 = json::parse(r5.out);
    REQUIRE(j5["records"][3]["scaling"] == "fixed-factor");
    REQUIRE(j5["records"][3]["decision"] == "reject");

    auto r1 = run(args + std::vector<std::string>{"--alpha", "0.01"});
    auto j1 = json::parse(r1.out);
    REQUIRE(j1["records"][3]["decision"] == "accept");
    REQUIRE(j1["records"][0]["decision"] == "reject");
    REQUIRE(j1["interaction_detected"] == true);
}

TEST_CASE("structured fit output carries every number printed in text mode") {
    auto text = run(ex2("fit") + std::vector<std::string>{"--scaling", "effects-coding"}).out;
    auto j = json::parse(run(ex2("fit") + std::vector<std::string>{"--scaling", "effects-coding", "--format", "json"}).out);
    std::istringstream lines(text);
    std::map<std::string, std::string> printed;
    for (std::string line; std::getline(lines, line);) {
        std::istringstream ls(line);
        std::string name, value, status;
        if (ls >> name >> value >> status && (status == "free" || status == "fixed" || status == "constrained"))
            printed[name] = value;
    }
    REQUIRE(printed.size() == 23);
    for (const auto& p : j["parameters"]) REQUIRE(printed.at(p["parameter"].get<std::string>()) == fmt(p["estimate"].get<double>()));
    REQUIRE_THAT(text, ContainsSubstring(fmt(j["fit"]["chi_square"].get<double>())));
    REQUIRE_THAT(text, ContainsSubstring(fmt(j["fit"]["srmr"].get<double>())));
    REQUIRE_THAT(text, ContainsSubstring(fmt(j["baseline"]["chi_square"].get<double>())));
}

TEST_CASE("structured audit output matches the text grid") {
    auto base = ex2("audit") + std::vector<std::string>{"--constraints", data("example2_constraints.txt")};
    auto text = run(base).out;
    auto j = json::parse(run(base + std::vector<std::string>{"--format", "json"}).out);
    for (const auto& rec : j["records"]) {
        REQUIRE_THAT(text, ContainsSubstring(fmt(rec["restricted"]["chi_square"].get<double>())));
        REQUIRE_THAT(text, ContainsSubstring(fmt(rec["difference"]["p_value"].get<double>())));
    }
}

TEST_CASE("interpret prints every scaling and the combinations") {
    auto r = run(ex1("interpret"));
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("Scaling: marker-1"));
    REQUIRE_THAT(r.out, ContainsSubstring("Scaling: marker-2"));
    REQUIRE_THAT(r.out, ContainsSubstring("Scaling: fixed-factor"));
    REQUIRE_THAT(r.out, ContainsSubstring("Scaling: effects-coding"));
    REQUIRE_THAT(r.out, ContainsSubstring("latent-correlation"));
    REQUIRE_THAT(r.out, ContainsSubstring("Phi[A,B]/sqrt(Phi[A,A]*Phi[B,B])"));
    REQUIRE_THAT(r.out, ContainsSubstring("0.68041"));
}

TEST_CASE("interpret with every parameter fixed still reports") {
    auto cons = temp_file("allfixed.cons",
                          "fix A->X1 = 1\nfix A->X2 = 0.625\nfix B->X3 = 1\nfix B->X4 = 0.625\n"
                          "fix A~~A = 11.52\nfix A~~B = 3.2\nfix B~~B = 1.92\n"
                          "fix X1~~X1 = 13.48\nfix X2~~X2 = 4.5\nfix X3~~X3 = 2.08\nfix X4~~X4 = 3.25\n");
    auto r = run(ex1("interpret") + std::vector<std::string>{"--constraints", cons, "--scaling", "marker-1"});
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("free parameters: (none)"));
    REQUIRE_THAT(r.out, ContainsSubstring("loading-ratio-to-marker"));

    auto all = run(ex1("interpret") + std::vector<std::string>{"--constraints", cons});
    REQUIRE(all.code == 0);
    REQUIRE_THAT(all.out, ContainsSubstring("Scaling fixed-factor skipped"));
}

TEST_CASE("report can be written to a file") {
    auto path = (std::filesystem::temp_directory_path() / "scalecheck_test_out.json").string();
    std::filesystem::remove(path);
    auto r = run(ex1("fit") + std::vector<std::string>{"--format", "json", "--out", path});
    REQUIRE(r.code == 0);
    REQUIRE(r.out.empty());
    auto j = json::parse(read_file(path));
    REQUIRE(j["command"] == "fit");
    REQUIRE(j["fit"]["df"] == 1);
}

TEST_CASE("audit runs every scaling and takes no scaling option") {
    auto r = run(ex1("audit") + std::vector<std::string>{"--constraints", data("example1_constraints.txt"), "--scaling", "marker-1"});
    REQUIRE(r.code == 2);
}

TEST_CASE("help lists the subcommands") {
    auto r = run({"--help"});
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.out, ContainsSubstring("interpret"));
}
