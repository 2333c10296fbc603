#include "jmsched/jmsched.h"

#include "jmsched/dynpred.hpp"
#include "jmsched/error.hpp"
#include "jmsched/io.hpp"
#include "jmsched/mcmc.hpp"
#include "jmsched/simulate.hpp"

#include <algorithm>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

struct jms_config {
    jms::Config config;
};

struct jms_dataset {
    jms::Dataset data;
};

struct jms_model {
    jms::PosteriorSamples samples;
    jms::FitSummary summary;
    jms::McmcConfig mcmc;
};

struct jms_plan {
    jms::SchedulePlan plan;
};

namespace {

thread_local std::string last_error;

jms_status fail(jms_status status, const std::string& message) {
    last_error = message;
    return status;
}

template <class F>
jms_status guarded(F&& body) {
    try {
        body();
        return JMS_OK;
    } catch (const jms::Error& e) {
        return fail(static_cast<jms_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(JMS_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(JMS_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(JMS_ERR_INTERNAL, "unknown error");
    }
}

#define JMS_REQUIRE(ptr)                                                                   \
    do {                                                                                   \
        if (!(ptr)) return fail(JMS_ERR_NULL_ARGUMENT, "null argument '" #ptr "'");        \
    } while (0)

void copy_out(const std::string& s, char* buffer, size_t capacity, size_t* length) {
    if (length) *length = s.size();
    if (buffer && capacity > 0) {
        const size_t n = std::min(capacity - 1, s.size());
        std::memcpy(buffer, s.data(), n);
        buffer[n] = '\0';
    }
}

jms::SubjectHistory history_for(const jms::Dataset& data, const char* subject_id, double t) {
    return jms::SubjectHistory::at_landmark(data.find(subject_id), t);
}

}  // namespace

extern "C" {

const char* jms_version(void) { return "1.0.0"; }

const char* jms_last_error(void) { return last_error.c_str(); }

const char* jms_status_name(jms_status status) {
    switch (status) {
        case JMS_OK: return "ok";
        case JMS_ERR_DOMAIN: return "domain error";
        case JMS_ERR_CONFIG: return "configuration error";
        case JMS_ERR_NUMERIC: return "numeric error";
        case JMS_ERR_PARSE: return "parse error";
        case JMS_ERR_DATA: return "data error";
        case JMS_ERR_PRECONDITION: return "precondition error";
        case JMS_ERR_IO: return "i/o error";
        case JMS_ERR_NULL_ARGUMENT: return "null argument";
        case JMS_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

// ---- configuration

jms_status jms_config_new(jms_config** out) {
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] { *out = new jms_config{}; });
}

jms_status jms_config_load(const char* path, jms_config** out) {
    JMS_REQUIRE(path);
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] { *out = new jms_config{jms::Config::load(path)}; });
}

jms_status jms_config_set(jms_config* config, const char* key, const char* value) {
    JMS_REQUIRE(config);
    JMS_REQUIRE(key);
    JMS_REQUIRE(value);
    return guarded([&] {
        if (!*key) throw jms::ConfigError("empty configuration key");
        config->config.set(key, value);
    });
}

jms_status jms_config_override(jms_config* config, const char* assignment) {
    JMS_REQUIRE(config);
    JMS_REQUIRE(assignment);
    return guarded([&] { config->config.apply_override(assignment); });
}

jms_status jms_config_get(const jms_config* config, const char* key, char* buffer, size_t capacity, size_t* length) {
    JMS_REQUIRE(config);
    JMS_REQUIRE(key);
    return guarded([&] {
        if (!config->config.has(key)) throw jms::ConfigError(std::string("no setting '") + key + "'");
        copy_out(config->config.entries().at(key), buffer, capacity, length);
    });
}

void jms_config_free(jms_config* config) { delete config; }

// ---- data

jms_status jms_dataset_read(const char* longitudinal_csv, const char* survival_csv, jms_dataset** out) {
    JMS_REQUIRE(longitudinal_csv);
    JMS_REQUIRE(survival_csv);
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] { *out = new jms_dataset{jms::read_dataset(longitudinal_csv, survival_csv)}; });
}

jms_status jms_dataset_write(const jms_dataset* data, const char* longitudinal_csv, const char* survival_csv) {
    JMS_REQUIRE(data);
    JMS_REQUIRE(longitudinal_csv);
    JMS_REQUIRE(survival_csv);
    return guarded([&] { jms::write_dataset(data->data, longitudinal_csv, survival_csv); });
}

jms_status jms_dataset_size(const jms_dataset* data, size_t* subjects, size_t* measurements) {
    JMS_REQUIRE(data);
    if (subjects) *subjects = data->data.subjects.size();
    if (measurements) {
        size_t n = 0;
        for (const auto& s : data->data.subjects) n += s.times.size();
        *measurements = n;
    }
    return JMS_OK;
}

jms_status jms_simulate(const jms_config* config, jms_dataset** out) {
    JMS_REQUIRE(config);
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        const auto design = jms::simulation_design_from(config->config);
        *out = new jms_dataset{jms::generate_dataset(design)};
    });
}

jms_status jms_write_truth(const jms_config* config, const char* path) {
    JMS_REQUIRE(config);
    JMS_REQUIRE(path);
    return guarded([&] {
        const auto design = jms::simulation_design_from(config->config);
        std::ostringstream s;
        jms::write_truth(s, design.theta, design.model);
        jms::write_file(path, s.str());
    });
}

void jms_dataset_free(jms_dataset* data) { delete data; }

// ---- fitting

jms_status jms_fit(const jms_config* config, const jms_dataset* data, jms_model** out) {
    JMS_REQUIRE(config);
    JMS_REQUIRE(data);
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        const auto& c = config->config;
        const auto model = jms::build_model(jms::model_spec_from(c), data->data);
        const auto priors = jms::priors_from(c);
        auto mcmc = jms::mcmc_config_from(c);
        mcmc.store_random_effects = true;
        auto result = std::make_unique<jms_model>();
        result->samples = jms::fit(data->data, model, priors, mcmc);
        result->summary.dic = jms::dic(result->samples, data->data);
        result->summary.converged = result->samples.diagnostics.converged;
        result->summary.draws = result->samples.size();
        result->samples.random_effects.clear();
        result->samples.random_effects.shrink_to_fit();
        result->mcmc = mcmc;
        *out = result.release();
    });
}

jms_status jms_model_save(const jms_model* model, const char* directory) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(directory);
    return guarded([&] { jms::save_fit(directory, model->samples, model->summary, model->mcmc); });
}

jms_status jms_model_load(const char* directory, jms_model** out) {
    JMS_REQUIRE(directory);
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        auto result = std::make_unique<jms_model>();
        result->samples = jms::load_fit(directory);
        result->summary = jms::load_fit_summary(directory);
        result->samples.diagnostics.converged = result->summary.converged;
        *out = result.release();
    });
}

jms_status jms_model_num_draws(const jms_model* model, size_t* draws) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(draws);
    *draws = model->samples.size();
    return JMS_OK;
}

jms_status jms_model_num_parameters(const jms_model* model, size_t* count) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(count);
    return guarded([&] { *count = jms::parameter_names(model->samples.model).size(); });
}

jms_status jms_model_posterior_mean(const jms_model* model, size_t k, double* mean) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(mean);
    return guarded([&] {
        const auto v = jms::flatten(model->samples.posterior_mean(), model->samples.model);
        if (k >= static_cast<size_t>(v.size())) throw jms::DomainError("parameter index out of range");
        *mean = v(static_cast<Eigen::Index>(k));
    });
}

jms_status jms_model_converged(const jms_model* model, int* converged) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(converged);
    *converged = model->summary.converged ? 1 : 0;
    return JMS_OK;
}

jms_status jms_model_dic(const jms_model* model, double* dic, double* p_d) {
    JMS_REQUIRE(model);
    if (dic) *dic = model->summary.dic.dic;
    if (p_d) *p_d = model->summary.dic.p_d;
    return JMS_OK;
}

jms_status jms_model_num_flags(const jms_model* model, size_t* count) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(count);
    *count = model->samples.diagnostics.flags.size();
    return JMS_OK;
}

jms_status jms_model_flag(const jms_model* model, size_t k, char* buffer, size_t capacity, size_t* length) {
    JMS_REQUIRE(model);
    const auto& flags = model->samples.diagnostics.flags;
    if (k >= flags.size()) return fail(JMS_ERR_DOMAIN, "flag index out of range");
    copy_out(flags[k], buffer, capacity, length);
    return JMS_OK;
}

void jms_model_free(jms_model* model) { delete model; }

// ---- prediction and scoring

jms_status jms_cv_dcl(const jms_model* model, const jms_dataset* data, double t, const jms_config* config,
                      double* value, int* n_at_risk) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(data);
    JMS_REQUIRE(config);
    return guarded([&] {
        const auto r = jms::cv_dcl(model->samples, data->data, t, jms::cv_dcl_config_from(config->config));
        if (value) *value = r.value;
        if (n_at_risk) *n_at_risk = r.n_at_risk;
    });
}

jms_status jms_score_write(const jms_model* const* models, const char* const* names, size_t count,
                           const jms_dataset* data, const double* landmarks, size_t n_landmarks,
                           const jms_config* config, const char* path) {
    JMS_REQUIRE(models);
    JMS_REQUIRE(names);
    JMS_REQUIRE(data);
    JMS_REQUIRE(config);
    JMS_REQUIRE(path);
    if (n_landmarks > 0) JMS_REQUIRE(landmarks);
    return guarded([&] {
        const auto cfg = jms::cv_dcl_config_from(config->config);
        const std::vector<double> ts(landmarks, landmarks + n_landmarks);
        std::vector<int> n_at_risk(n_landmarks, 0);
        std::vector<jms::ScoreRow> rows;
        for (size_t m = 0; m < count; ++m) {
            if (!models[m] || !names[m]) throw jms::PreconditionError("null model or name in score list");
            jms::ScoreRow row;
            row.model = names[m];
            row.dic = models[m]->summary.dic.dic;
            for (size_t k = 0; k < n_landmarks; ++k) {
                const auto r = jms::cv_dcl(models[m]->samples, data->data, ts[k], cfg);
                row.cv_dcl.push_back(r.value);
                n_at_risk[k] = r.n_at_risk;
            }
            rows.push_back(std::move(row));
        }
        std::ostringstream s;
        jms::write_score_table(s, ts, n_at_risk, rows);
        jms::write_file(path, s.str());
    });
}

jms_status jms_predict(const jms_model* model, const jms_dataset* data, const char* subject_id, double t,
                       const double* u, size_t n, const jms_config* config, double* pi) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(data);
    JMS_REQUIRE(subject_id);
    JMS_REQUIRE(config);
    if (n > 0) {
        JMS_REQUIRE(u);
        JMS_REQUIRE(pi);
    }
    return guarded([&] {
        const auto sc = jms::schedule_config_from(config->config);
        const auto history = history_for(data->data, subject_id, t);
        const jms::PiEstimator estimator(model->samples, history, sc.pi_draws, sc.seed, sc.chains);
        for (size_t k = 0; k < n; ++k) pi[k] = estimator(u[k]);
    });
}

jms_status jms_write_curve(const char* path, const double* u, const double* pi, size_t n) {
    JMS_REQUIRE(path);
    if (n > 0) {
        JMS_REQUIRE(u);
        JMS_REQUIRE(pi);
    }
    return guarded([&] {
        std::ostringstream s;
        jms::write_curve(s, std::vector<double>(u, u + n), std::vector<double>(pi, pi + n));
        jms::write_file(path, s.str());
    });
}

// ---- scheduling

jms_status jms_schedule(const jms_model* model, const jms_dataset* data, const char* subject_id, double t,
                        const jms_config* config, jms_plan** out) {
    JMS_REQUIRE(model);
    JMS_REQUIRE(data);
    JMS_REQUIRE(subject_id);
    JMS_REQUIRE(config);
    JMS_REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        const auto sc = jms::schedule_config_from(config->config);
        const auto history = history_for(data->data, subject_id, t);
        *out = new jms_plan{jms::schedule_next(history, model->samples, sc)};
    });
}

jms_status jms_plan_size(const jms_plan* plan, size_t* points) {
    JMS_REQUIRE(plan);
    JMS_REQUIRE(points);
    *points = plan->plan.grid.size();
    return JMS_OK;
}

jms_status jms_plan_horizon(const jms_plan* plan, double* t, double* t_up) {
    JMS_REQUIRE(plan);
    if (t) *t = plan->plan.t;
    if (t_up) *t_up = plan->plan.t_up;
    return JMS_OK;
}

jms_status jms_plan_point(const jms_plan* plan, size_t k, double* u, double* ekl, double* ekl_lo, double* ekl_hi,
                          double* pi) {
    JMS_REQUIRE(plan);
    const auto& p = plan->plan;
    if (k >= p.grid.size()) return fail(JMS_ERR_DOMAIN, "plan index out of range");
    if (u) *u = p.grid[k];
    if (ekl) *ekl = p.ekl[k].estimate;
    if (ekl_lo) *ekl_lo = p.ekl[k].lower;
    if (ekl_hi) *ekl_hi = p.ekl[k].upper;
    if (pi) *pi = p.pi[k];
    return JMS_OK;
}

jms_status jms_plan_selected(const jms_plan* plan, long* index) {
    JMS_REQUIRE(plan);
    JMS_REQUIRE(index);
    *index = plan->plan.selected ? static_cast<long>(*plan->plan.selected) : -1;
    return JMS_OK;
}

jms_status jms_plan_num_flags(const jms_plan* plan, size_t* count) {
    JMS_REQUIRE(plan);
    JMS_REQUIRE(count);
    *count = plan->plan.flags.size();
    return JMS_OK;
}

jms_status jms_plan_flag(const jms_plan* plan, size_t k, char* buffer, size_t capacity, size_t* length) {
    JMS_REQUIRE(plan);
    if (k >= plan->plan.flags.size()) return fail(JMS_ERR_DOMAIN, "flag index out of range");
    copy_out(plan->plan.flags[k], buffer, capacity, length);
    return JMS_OK;
}

jms_status jms_plan_write(const jms_plan* plan, const char* path) {
    JMS_REQUIRE(plan);
    JMS_REQUIRE(path);
    return guarded([&] {
        std::ostringstream s;
        jms::write_plan(s, plan->plan);
        jms::write_file(path, s.str());
    });
}

void jms_plan_free(jms_plan* plan) { delete plan; }

}  // extern "C"
