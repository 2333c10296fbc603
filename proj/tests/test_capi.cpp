#include "doctest.h"

#include "jmsched/jmsched.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Handles {
    jms_config* config = nullptr;
    jms_dataset* data = nullptr;
    jms_model* model = nullptr;
    ~Handles() {
        jms_model_free(model);
        jms_dataset_free(data);
        jms_config_free(config);
    }
};

jms_config* small_design() {
    jms_config* c = nullptr;
    REQUIRE(jms_config_new(&c) == JMS_OK);
    for (const char* kv : {"seed=5", "sim.n_subjects=40", "sim.visits=0,1,2,3,4", "model.baseline_basis=5",
                           "truth.beta=2,0.3", "truth.alpha=0.3", "truth.gamma_h0=-2.5,-2.5,-2.5,-2.5,-2.5",
                           "mcmc.chains=2", "mcmc.iterations=200", "mcmc.burn_in=100", "schedule.outer=20",
                           "schedule.inner=10", "schedule.pi_draws=40", "schedule.grid_size=4", "schedule.t_max=3",
                           "schedule.kappa=0.5", "score.max_draws=20", "score.re_draws=5"})
        REQUIRE(jms_config_override(c, kv) == JMS_OK);
    return c;
}

}  // namespace

TEST_CASE("status names and null arguments") {
    CHECK(std::string(jms_status_name(JMS_OK)) == "ok");
    CHECK(std::strlen(jms_status_name(JMS_ERR_CONFIG)) > 0);
    CHECK(std::strlen(jms_version()) > 0);
    CHECK(jms_config_new(nullptr) == JMS_ERR_NULL_ARGUMENT);
    CHECK(std::strlen(jms_last_error()) > 0);
    size_t n = 0;
    CHECK(jms_dataset_size(nullptr, &n, &n) == JMS_ERR_NULL_ARGUMENT);
    CHECK(jms_model_num_draws(nullptr, &n) == JMS_ERR_NULL_ARGUMENT);
    CHECK(jms_plan_size(nullptr, &n) == JMS_ERR_NULL_ARGUMENT);
    jms_config_free(nullptr);
    jms_dataset_free(nullptr);
    jms_model_free(nullptr);
    jms_plan_free(nullptr);
}

TEST_CASE("config values are copied with truncation") {
    jms_config* c = nullptr;
    REQUIRE(jms_config_new(&c) == JMS_OK);
    REQUIRE(jms_config_set(c, "name", "abcdef") == JMS_OK);
    char buf[4];
    size_t len = 0;
    CHECK(jms_config_get(c, "name", buf, sizeof buf, &len) == JMS_OK);
    CHECK(len == 6u);
    CHECK(std::string(buf) == "abc");
    CHECK(jms_config_override(c, "broken") != JMS_OK);
    CHECK(jms_config_get(c, "absent", buf, sizeof buf, &len) != JMS_OK);
    jms_config_free(c);
    CHECK(jms_config_load("/nonexistent/x.cfg", &c) == JMS_ERR_IO);
}

TEST_CASE("simulate, fit, save, load, predict and schedule") {
    Handles h;
    h.config = small_design();
    REQUIRE(jms_simulate(h.config, &h.data) == JMS_OK);
    size_t subjects = 0, measurements = 0;
    REQUIRE(jms_dataset_size(h.data, &subjects, &measurements) == JMS_OK);
    CHECK(subjects == 40u);
    CHECK(measurements >= 40u);

    const fs::path dir = fs::path("capi_run");
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string lon = (dir / "l.csv").string(), sur = (dir / "s.csv").string();
    REQUIRE(jms_dataset_write(h.data, lon.c_str(), sur.c_str()) == JMS_OK);
    jms_dataset* again = nullptr;
    REQUIRE(jms_dataset_read(lon.c_str(), sur.c_str(), &again) == JMS_OK);
    size_t s2 = 0, m2 = 0;
    jms_dataset_size(again, &s2, &m2);
    CHECK(s2 == subjects);
    CHECK(m2 == measurements);
    jms_dataset_free(again);
    CHECK(jms_write_truth(h.config, (dir / "truth.txt").string().c_str()) == JMS_OK);

    jms_config* unseeded = nullptr;
    REQUIRE(jms_config_new(&unseeded) == JMS_OK);
    jms_model* none = nullptr;
    CHECK(jms_fit(unseeded, h.data, &none) == JMS_ERR_CONFIG);
    CHECK(std::string(jms_last_error()).find("seed") != std::string::npos);
    CHECK(none == nullptr);
    jms_config_free(unseeded);

    REQUIRE(jms_fit(h.config, h.data, &h.model) == JMS_OK);
    size_t draws = 0, params = 0;
    REQUIRE(jms_model_num_draws(h.model, &draws) == JMS_OK);
    REQUIRE(jms_model_num_parameters(h.model, &params) == JMS_OK);
    CHECK(draws == 200u);
    double mean = 0.0;
    REQUIRE(jms_model_posterior_mean(h.model, 0, &mean) == JMS_OK);
    CHECK(std::abs(mean - 2.0) < 1.0);
    CHECK(jms_model_posterior_mean(h.model, params, &mean) == JMS_ERR_DOMAIN);
    double dic = 0.0, pd = 0.0;
    REQUIRE(jms_model_dic(h.model, &dic, &pd) == JMS_OK);
    CHECK(std::isfinite(dic));

    const std::string fit_dir = (dir / "fit").string();
    REQUIRE(jms_model_save(h.model, fit_dir.c_str()) == JMS_OK);
    jms_model* loaded = nullptr;
    REQUIRE(jms_model_load(fit_dir.c_str(), &loaded) == JMS_OK);
    double mean2 = 0.0;
    jms_model_posterior_mean(loaded, 0, &mean2);
    CHECK(mean2 == mean);

    double value = 0.0;
    int at_risk = 0;
    REQUIRE(jms_cv_dcl(loaded, h.data, 1.0, h.config, &value, &at_risk) == JMS_OK);
    CHECK(at_risk > 0);
    CHECK(std::isfinite(value));

    const double u[] = {1.0, 2.0, 3.5};
    double pi[3];
    REQUIRE(jms_predict(loaded, h.data, "01", 1.0, u, 3, h.config, pi) == JMS_OK);
    CHECK(pi[0] == doctest::Approx(1.0));
    CHECK(pi[1] <= pi[0]);
    CHECK(pi[2] <= pi[1]);
    CHECK(jms_predict(loaded, h.data, "no-such-subject", 1.0, u, 3, h.config, pi) != JMS_OK);

    jms_plan* plan = nullptr;
    REQUIRE(jms_schedule(loaded, h.data, "01", 1.0, h.config, &plan) == JMS_OK);
    size_t points = 0;
    jms_plan_size(plan, &points);
    double t = 0.0, t_up = 0.0;
    jms_plan_horizon(plan, &t, &t_up);
    CHECK(t == 1.0);
    CHECK(t_up <= 4.0 + 1e-12);
    CHECK(points == 4u);
    long selected = -2;
    jms_plan_selected(plan, &selected);
    CHECK(selected >= -1);
    CHECK(selected < static_cast<long>(points));
    for (size_t k = 0; k < points; ++k) {
        double uk, e, lo, hi, p;
        REQUIRE(jms_plan_point(plan, k, &uk, &e, &lo, &hi, &p) == JMS_OK);
        CHECK(uk > t);
        CHECK(uk <= t_up + 1e-12);
        CHECK(lo <= hi);
    }
    double dummy;
    CHECK(jms_plan_point(plan, points, &dummy, &dummy, &dummy, &dummy, &dummy) == JMS_ERR_DOMAIN);
    REQUIRE(jms_plan_write(plan, (dir / "plan.csv").string().c_str()) == JMS_OK);
    CHECK(fs::file_size(dir / "plan.csv") > 0);
    jms_plan_free(plan);
    jms_model_free(loaded);
    fs::remove_all(dir);
}
