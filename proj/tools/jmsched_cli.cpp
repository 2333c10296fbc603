// Command-line front end over the C API: simulate, fit, score, predict, schedule.

#include "jmsched/jmsched.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

struct Failure : std::runtime_error {
    Failure(jms_status s, const std::string& what) : std::runtime_error(what), status(s) {}
    jms_status status;
};

void check(jms_status s, const std::string& context) {
    if (s != JMS_OK) throw Failure(s, context + ": " + jms_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<jms_config, Deleter<jms_config, jms_config_free>>;
using DatasetPtr = std::unique_ptr<jms_dataset, Deleter<jms_dataset, jms_dataset_free>>;
using ModelPtr = std::unique_ptr<jms_model, Deleter<jms_model, jms_model_free>>;
using PlanPtr = std::unique_ptr<jms_plan, Deleter<jms_plan, jms_plan_free>>;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string seed;
};

struct DataPaths {
    std::string dir, longitudinal, survival;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config_path, "key=value settings file")->check(CLI::ExistingFile);
    app->add_option("--set", c.overrides, "override a setting, key=value (repeatable)");
    app->add_option("--seed", c.seed, "shorthand for --set seed=N");
}

void add_data(CLI::App* app, DataPaths& d) {
    app->add_option("--data", d.dir, "directory holding longitudinal.csv and survival.csv");
    app->add_option("--longitudinal", d.longitudinal, "longitudinal table (subject_id,time,value,...)");
    app->add_option("--survival", d.survival, "survival table (subject_id,event_time,event_indicator,...)");
}

std::string setting(const jms_config* cfg, const char* key) {
    size_t len = 0;
    if (jms_config_get(cfg, key, nullptr, 0, &len) != JMS_OK) return {};
    std::string out(len + 1, '\0');
    check(jms_config_get(cfg, key, out.data(), out.size(), &len), "reading setting");
    out.resize(len);
    return out;
}

ConfigPtr load_config(const Common& c) {
    jms_config* raw = nullptr;
    if (c.config_path.empty()) {
        check(jms_config_new(&raw), "creating settings");
    } else {
        check(jms_config_load(c.config_path.c_str(), &raw), "loading settings");
    }
    ConfigPtr cfg(raw);
    for (const auto& o : c.overrides) check(jms_config_override(cfg.get(), o.c_str()), "applying --set");
    if (!c.seed.empty()) check(jms_config_set(cfg.get(), "seed", c.seed.c_str()), "applying --seed");
    return cfg;
}

DatasetPtr load_data(const DataPaths& d, const jms_config* cfg) {
    namespace fs = std::filesystem;
    std::string lon = d.longitudinal, sur = d.survival;
    const std::string dir = d.dir.empty() ? setting(cfg, "data.dir") : d.dir;
    if (lon.empty()) lon = setting(cfg, "data.longitudinal");
    if (sur.empty()) sur = setting(cfg, "data.survival");
    if (lon.empty() && !dir.empty()) lon = (fs::path(dir) / "longitudinal.csv").string();
    if (sur.empty() && !dir.empty()) sur = (fs::path(dir) / "survival.csv").string();
    if (lon.empty() || sur.empty())
        throw Failure(JMS_ERR_CONFIG, "input data not given (use --data DIR or --longitudinal/--survival)");
    jms_dataset* raw = nullptr;
    check(jms_dataset_read(lon.c_str(), sur.c_str(), &raw), "reading data");
    return DatasetPtr(raw);
}

ModelPtr load_model(const std::string& dir) {
    jms_model* raw = nullptr;
    check(jms_model_load(dir.c_str(), &raw), "loading fit '" + dir + "'");
    return ModelPtr(raw);
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Failure(JMS_ERR_CONFIG, what + ": '" + item + "' is not a number");
        }
    }
    return out;
}

int run_simulate(const Common& common, const std::string& out_dir) {
    namespace fs = std::filesystem;
    auto cfg = load_config(common);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Failure(JMS_ERR_IO, "cannot create '" + out_dir + "': " + ec.message());
    jms_dataset* raw = nullptr;
    check(jms_simulate(cfg.get(), &raw), "simulate");
    DatasetPtr data(raw);
    const auto lon = (fs::path(out_dir) / "longitudinal.csv").string();
    const auto sur = (fs::path(out_dir) / "survival.csv").string();
    check(jms_dataset_write(data.get(), lon.c_str(), sur.c_str()), "writing data");
    check(jms_write_truth(cfg.get(), (fs::path(out_dir) / "truth.txt").string().c_str()), "writing truth");
    size_t n = 0, m = 0;
    jms_dataset_size(data.get(), &n, &m);
    std::printf("simulated %zu subjects, %zu measurements -> %s\n", n, m, out_dir.c_str());
    return 0;
}

int run_fit(const Common& common, const DataPaths& paths, const std::string& out_dir) {
    auto cfg = load_config(common);
    auto data = load_data(paths, cfg.get());
    jms_model* raw = nullptr;
    check(jms_fit(cfg.get(), data.get(), &raw), "fit");
    ModelPtr model(raw);
    check(jms_model_save(model.get(), out_dir.c_str()), "saving fit");
    size_t flags = 0;
    jms_model_num_flags(model.get(), &flags);
    for (size_t k = 0; k < flags; ++k) {
        char buf[512];
        jms_model_flag(model.get(), k, buf, sizeof buf, nullptr);
        std::fprintf(stderr, "%s\n", buf);
    }
    int converged = 0;
    double dic = 0.0, p_d = 0.0;
    size_t draws = 0;
    jms_model_converged(model.get(), &converged);
    jms_model_dic(model.get(), &dic, &p_d);
    jms_model_num_draws(model.get(), &draws);
    std::printf("draws=%zu DIC=%.4f pD=%.4f converged=%s -> %s\n", draws, dic, p_d, converged ? "yes" : "NO",
                out_dir.c_str());
    return 0;
}

int run_score(const Common& common, const DataPaths& paths, const std::vector<std::string>& fits,
              const std::string& landmarks_text, const std::string& out) {
    namespace fs = std::filesystem;
    auto cfg = load_config(common);
    auto data = load_data(paths, cfg.get());
    const std::string lm = landmarks_text.empty() ? setting(cfg.get(), "score.landmarks") : landmarks_text;
    const auto landmarks = parse_list(lm, "landmarks");
    if (landmarks.empty()) throw Failure(JMS_ERR_CONFIG, "no landmarks given (use --landmarks or score.landmarks)");
    std::vector<ModelPtr> models;
    std::vector<std::string> names;
    for (const auto& f : fits) {
        const auto eq = f.find('=');
        std::string name, dir;
        if (eq == std::string::npos) {
            dir = f;
            name = fs::path(f).lexically_normal().filename().string();
            if (name.empty()) name = fs::path(f).lexically_normal().parent_path().filename().string();
        } else {
            name = f.substr(0, eq);
            dir = f.substr(eq + 1);
        }
        models.push_back(load_model(dir));
        names.push_back(name);
    }
    std::vector<const jms_model*> model_ptrs;
    std::vector<const char*> name_ptrs;
    for (size_t k = 0; k < models.size(); ++k) {
        model_ptrs.push_back(models[k].get());
        name_ptrs.push_back(names[k].c_str());
    }
    check(jms_score_write(model_ptrs.data(), name_ptrs.data(), models.size(), data.get(), landmarks.data(),
                          landmarks.size(), cfg.get(), out.c_str()),
          "score");
    std::printf("scored %zu models at %zu landmarks -> %s\n", models.size(), landmarks.size(), out.c_str());
    return 0;
}

int run_predict(const Common& common, const DataPaths& paths, const std::string& fit_dir, const std::string& subject,
                double t, const std::string& u_text, const std::string& out) {
    auto cfg = load_config(common);
    auto data = load_data(paths, cfg.get());
    auto model = load_model(fit_dir);
    std::vector<double> u;
    const std::string listed = u_text.empty() ? setting(cfg.get(), "predict.u") : u_text;
    if (!listed.empty()) {
        u = parse_list(listed, "prediction times");
    } else {
        const std::string step_s = setting(cfg.get(), "predict.step");
        const std::string horizon_s = setting(cfg.get(), "predict.horizon");
        const std::string tmax_s = setting(cfg.get(), "schedule.t_max");
        const double step = step_s.empty() ? 0.25 : parse_list(step_s, "predict.step").at(0);
        const double horizon =
            horizon_s.empty() ? t + (tmax_s.empty() ? 5.0 : parse_list(tmax_s, "schedule.t_max").at(0))
                              : parse_list(horizon_s, "predict.horizon").at(0);
        if (!(step > 0.0)) throw Failure(JMS_ERR_CONFIG, "predict.step must be positive");
        for (long k = 0;; ++k) {
            const double v = t + step * static_cast<double>(k);
            if (v > horizon + 1e-9 * step) break;
            u.push_back(v);
        }
    }
    std::vector<double> pi(u.size());
    check(jms_predict(model.get(), data.get(), subject.c_str(), t, u.data(), u.size(), cfg.get(), pi.data()),
          "predict");
    check(jms_write_curve(out.c_str(), u.data(), pi.data(), u.size()), "writing curve");
    std::printf("predicted %zu points for subject %s -> %s\n", u.size(), subject.c_str(), out.c_str());
    return 0;
}

int run_schedule(const Common& common, const DataPaths& paths, const std::string& fit_dir,
                 const std::string& subject, double t, const std::string& out) {
    auto cfg = load_config(common);
    auto data = load_data(paths, cfg.get());
    auto model = load_model(fit_dir);
    jms_plan* raw = nullptr;
    check(jms_schedule(model.get(), data.get(), subject.c_str(), t, cfg.get(), &raw), "schedule");
    PlanPtr plan(raw);
    check(jms_plan_write(plan.get(), out.c_str()), "writing plan");
    long selected = -1;
    double t_up = 0.0, u = 0.0;
    jms_plan_selected(plan.get(), &selected);
    jms_plan_horizon(plan.get(), nullptr, &t_up);
    size_t flags = 0;
    jms_plan_num_flags(plan.get(), &flags);
    for (size_t k = 0; k < flags; ++k) {
        char buf[512];
        jms_plan_flag(plan.get(), k, buf, sizeof buf, nullptr);
        std::fprintf(stderr, "%s\n", buf);
    }
    if (selected >= 0) {
        jms_plan_point(plan.get(), static_cast<size_t>(selected), &u, nullptr, nullptr, nullptr, nullptr);
        std::printf("subject %s: t=%g t_up=%g next measurement at u=%g -> %s\n", subject.c_str(), t, t_up, u,
                    out.c_str());
    } else {
        std::printf("subject %s: t=%g no feasible measurement time -> %s\n", subject.c_str(), t, out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian joint models: fitting, landmark scoring and personalized measurement scheduling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(jms_version()));

    Common common;
    DataPaths paths;
    std::string out, fit_dir, subject, landmarks, u_list;
    std::vector<std::string> fits;
    double t = 0.0;

    auto* sim = app.add_subcommand("simulate", "generate a dataset and its truth manifest");
    add_common(sim, common);
    sim->add_option("-o,--out", out, "output directory")->required();

    auto* fitc = app.add_subcommand("fit", "fit a joint model by MCMC");
    add_common(fitc, common);
    add_data(fitc, paths);
    fitc->add_option("-o,--out", out, "output fit directory")->required();

    auto* score = app.add_subcommand("score", "DIC and cvDCL table for fitted models");
    add_common(score, common);
    add_data(score, paths);
    score->add_option("--fit", fits, "fit directory, optionally NAME=DIR (repeatable)")->required();
    score->add_option("--landmarks", landmarks, "comma-separated landmark times");
    score->add_option("-o,--out", out, "output CSV")->required();

    auto* predict = app.add_subcommand("predict", "conditional survival curve for one subject");
    add_common(predict, common);
    add_data(predict, paths);
    predict->add_option("--fit", fit_dir, "fit directory")->required();
    predict->add_option("--subject", subject, "subject id")->required();
    predict->add_option("-t,--landmark", t, "landmark time")->required();
    predict->add_option("--u", u_list, "comma-separated prediction times (default: t to t + t_max)");
    predict->add_option("-o,--out", out, "output CSV")->required();

    auto* sched = app.add_subcommand("schedule", "next-measurement plan for one subject");
    add_common(sched, common);
    add_data(sched, paths);
    sched->add_option("--fit", fit_dir, "fit directory")->required();
    sched->add_option("--subject", subject, "subject id")->required();
    sched->add_option("-t,--landmark", t, "landmark time")->required();
    sched->add_option("-o,--out", out, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return run_simulate(common, out);
        if (*fitc) return run_fit(common, paths, out);
        if (*score) return run_score(common, paths, fits, landmarks, out);
        if (*predict) return run_predict(common, paths, fit_dir, subject, t, u_list, out);
        if (*sched) return run_schedule(common, paths, fit_dir, subject, t, out);
    } catch (const Failure& e) {
        std::fprintf(stderr, "error (%s): %s\n", jms_status_name(e.status), e.what());
        return static_cast<int>(e.status);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
