#include "jmsched/simulate.hpp"

#include "jmsched/dynpred.hpp"
#include "jmsched/error.hpp"
#include "jmsched/random.hpp"

#include <algorithm>
#include <cmath>

namespace jms {

double SimulationDesign::admin_time() const {
    if (std::isnan(admin_censoring)) return visits.empty() ? std::numeric_limits<double>::infinity() : visits.back();
    return admin_censoring;
}

void SimulationDesign::validate() const {
    if (n_subjects < 1) throw ConfigError("simulation needs at least one subject");
    if (visits.empty()) throw ConfigError("simulation visit schedule is empty");
    for (size_t k = 0; k < visits.size(); ++k) {
        if (!(visits[k] >= 0.0)) throw ConfigError("visit times must be nonnegative");
        if (k > 0 && visits[k] <= visits[k - 1]) throw ConfigError("visit times must be strictly ascending");
    }
    if (!(jitter >= 0.0)) throw ConfigError("visit jitter must be nonnegative");
    if (!(censoring_rate >= 0.0)) throw ConfigError("censoring rate must be nonnegative");
    if (!(admin_time() > 0.0)) throw ConfigError("administrative censoring time must be positive");
    theta.validate(model);
}

namespace {

std::vector<double> even_knots(int count, double lo, double hi) {
    std::vector<double> out;
    for (int k = 1; k <= count; ++k) out.push_back(lo + (hi - lo) * k / (count + 1));
    return out;
}

}  // namespace

JointModel design_model(ModelSpec spec, double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("design horizon must be positive and finite");
    if (!(spec.baseline_upper > 0.0)) spec.baseline_upper = horizon;
    if (spec.baseline_knots.empty()) {
        const int interior = spec.baseline_basis - spec.baseline_degree - 1;
        if (interior < 0) throw ConfigError("baseline basis is smaller than degree + 1");
        spec.baseline_knots = even_knots(interior, 0.0, spec.baseline_upper);
    }
    if (spec.natural_spline_time) {
        if (!(spec.time_upper > spec.time_lower)) spec.time_upper = horizon;
        if (spec.time_knots.empty()) spec.time_knots = even_knots(spec.time_num_knots, spec.time_lower, spec.time_upper);
    }
    return build_model(spec, Dataset{});
}

Dataset generate_dataset(const SimulationDesign& design) {
    design.validate();
    const auto& model = design.model;
    Dataset data;
    for (const auto& g : design.covariates) {
        const bool in_long = std::find(model.longitudinal.covariates.begin(), model.longitudinal.covariates.end(),
                                       g.name) != model.longitudinal.covariates.end();
        (in_long ? data.longitudinal_covariates : data.survival_covariates).push_back(g.name);
    }
    const double admin = design.admin_time();
    const double horizon = std::isfinite(admin) ? admin : design.visits.back();
    const double cap = 100.0 * std::max(horizon, 1.0);
    const Eigen::MatrixXd L = design.theta.D.llt().matrixL();
    const int width = std::max(1, static_cast<int>(std::to_string(design.n_subjects).size()));

    for (int i = 0; i < design.n_subjects; ++i) {
        Rng rng = make_stream(design.seed, {static_cast<std::uint64_t>(i)});
        Subject s;
        std::string id = std::to_string(i + 1);
        s.id = std::string(static_cast<size_t>(width) - std::min(id.size(), static_cast<size_t>(width)), '0') + id;
        for (const auto& g : design.covariates) {
            double v = 0.0;
            switch (g.kind) {
                case CovariateGenerator::Kind::bernoulli: v = uniform_open(rng) < g.a ? 1.0 : 0.0; break;
                case CovariateGenerator::Kind::normal: v = g.a + g.b * std_normal(rng); break;
                case CovariateGenerator::Kind::uniform: v = g.a + (g.b - g.a) * uniform_open(rng); break;
            }
            s.covariates[g.name] = v;
        }
        const auto cov = bind_covariates(model, s);
        const Eigen::VectorXd b = L * std_normal_vector(rng, model.num_random());
        const auto event = simulate_event_time(model, design.theta, cov, b, 0.0, rng, cap);
        double censor = admin;
        if (design.censoring_rate > 0.0)
            censor = std::min(censor, -std::log(uniform_open(rng)) / design.censoring_rate);
        if (!event.capped && event.time <= censor) {
            s.event_time = event.time;
            s.event = 1;
        } else {
            s.event_time = std::min(censor, event.time);
            s.event = 0;
        }
        if (!(s.event_time > 0.0)) s.event_time = std::numeric_limits<double>::min();

        std::vector<double> times;
        for (double v : design.visits) {
            double t = v;
            if (v > 0.0 && design.jitter > 0.0) t += design.jitter * (2.0 * uniform_open(rng) - 1.0);
            times.push_back(std::max(t, 0.0));
        }
        std::sort(times.begin(), times.end());
        for (double t : times) {
            if (t > s.event_time) break;
            s.times.push_back(t);
            s.values.push_back(simulate_future_measurement(model, cov, b, design.theta, t, rng));
        }
        data.subjects.push_back(std::move(s));
    }
    return data;
}

}  // namespace jms
