#ifndef SCALECHECK_TEST_FIXTURES_HPP
#define SCALECHECK_TEST_FIXTURES_HPP

#include <Eigen/Dense>

#include "scalecheck.hpp"

namespace fixtures {

inline Eigen::MatrixXd s1() {
    Eigen::MatrixXd s(4, 4);
    s << 25, 7.2, 3.2, 2,
         7.2, 9, 2, 1.25,
         3.2, 2, 4, 1.2,
         2, 1.25, 1.2, 4;
    return s;
}

inline Eigen::MatrixXd s2() {
    const double lower[] = {3.640,
                            3.200, 17.000,
                            2.560, 12.800, 14.240,
                            1.600, 8.000, 6.400, 6.000,
                            1.160, 4.800, 3.840, 2.400, 27.000,
                            0.960, 5.300, 3.840, 2.400, 25.000, 32.000,
                            0.768, 3.840, 3.322, 1.920, 20.000, 20.000, 17.000,
                            0.384, 1.920, 1.536, 1.460, 10.000, 10.000, 8.000, 12.000};
    Eigen::MatrixXd s(8, 8);
    int k = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j <= i; ++j) s(i, j) = s(j, i) = lower[k++];
    return s;
}

inline scalecheck::ModelSpec spec1() { return scalecheck::parse_model_spec("A =~ X1 + X2\nB =~ X3 + X4\n"); }

inline scalecheck::ModelSpec spec2() {
    return scalecheck::parse_model_spec("A1 =~ X11 + X21 + X31 + X41\n"
                                        "A2 =~ X12 + X22 + X32 + X42\n"
                                        "X11 ~~ X12\nX21 ~~ X22\nX31 ~~ X32\nX41 ~~ X42\n");
}

inline scalecheck::SampleMoments moments1() { return {s1(), 200}; }
inline scalecheck::SampleMoments moments2() { return {s2(), 150}; }

inline scalecheck::Constraint tested1() {
    using scalecheck::ParamAddress;
    return scalecheck::Constraint::equal(ParamAddress::loading("A", "X2"), ParamAddress::loading("B", "X4"));
}

inline scalecheck::Constraint tested2() {
    using scalecheck::ParamAddress;
    return scalecheck::Constraint::equal(ParamAddress::loading("A1", "X21"), ParamAddress::loading("A2", "X22"));
}

inline scalecheck::ParameterEstimate fit_with(const scalecheck::SampleMoments& m, const scalecheck::ModelSpec& spec,
                                              const scalecheck::ScalingMethod& s,
                                              const std::vector<scalecheck::Constraint>& extra = {}) {
    auto index = scalecheck::compile_constraints(spec, scalecheck::with_scaling(spec, s, extra));
    return scalecheck::fit(m, spec, index);
}

} // namespace fixtures

#endif
