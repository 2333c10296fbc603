#pragma once

#include "jmsched/model.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace jms {

struct CovariateGenerator {
    enum class Kind { bernoulli, normal, uniform };
    std::string name;
    Kind kind = Kind::bernoulli;
    double a = 0.5;  // bernoulli p | normal mean | uniform lower
    double b = 1.0;  // normal sd | uniform upper
};

struct SimulationDesign {
    int n_subjects = 100;
    JointModel model;
    Parameters theta;
    std::vector<double> visits{0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0};
    double jitter = 0.1;  // uniform half-width applied to visits after time 0
    /// Administrative censoring; non-finite means none. Default: the last nominal visit.
    double admin_censoring = std::numeric_limits<double>::quiet_NaN();
    double censoring_rate = 0.0;  // independent exponential censoring
    std::vector<CovariateGenerator> covariates;
    std::uint64_t seed = 0;

    double admin_time() const;
    void validate() const;
};

/// Builds a model before any data exist: knots not given in the spec are
/// spaced evenly over [0, horizon].
JointModel design_model(ModelSpec spec, double horizon);

/// Per subject: covariates, b ~ N(0, D), T* by inversion from 0, censoring,
/// then the jittered visits up to min(T*, C).
Dataset generate_dataset(const SimulationDesign& design);

}  // namespace jms
