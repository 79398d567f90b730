#ifndef SCALECHECK_HPP
#define SCALECHECK_HPP

#include "scalecheck/model.hpp"
#include "scalecheck/parameter_index.hpp"
#include "scalecheck/estimator.hpp"
#include "scalecheck/fitstats.hpp"
#include "scalecheck/scaling.hpp"
#include "scalecheck/interpretation.hpp"
#include "scalecheck/auditor.hpp"

#endif // SCALECHECK_HPP
