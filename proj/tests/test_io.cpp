#include "doctest.h"

#include "jmsched/error.hpp"
#include "jmsched/io.hpp"

#include <filesystem>
#include <sstream>

using namespace jms;
namespace fs = std::filesystem;

namespace {

Dataset parse(const std::string& longitudinal, const std::string& survival) {
    std::istringstream l(longitudinal), s(survival);
    return parse_dataset(l, "long.csv", s, "surv.csv");
}

std::string parse_error(const std::string& longitudinal, const std::string& survival) {
    try {
        parse(longitudinal, survival);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("jmsched_io_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

const char* kSurvival = "subject_id,event_time,event_indicator,group\nA,5.5,1,1\nB,3,0,0\n";
const char* kLongitudinal = "subject_id,time,value\nA,0,1.5\nA,1,1.7\nB,0,2\n";

}  // namespace

TEST_CASE("config parsing, overrides and typed getters") {
    Config c = Config::parse_text("# comment\nmcmc.iterations = 500\nflag=yes\nlist=1, 2.5,3\nname = a b\n");
    CHECK(c.get_int("mcmc.iterations", 0) == 500);
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_doubles("list") == std::vector<double>{1.0, 2.5, 3.0});
    CHECK(c.get("name", "") == "a b");
    CHECK(c.get("missing", "fallback") == "fallback");
    c.apply_override("mcmc.iterations=900");
    CHECK(c.get_int("mcmc.iterations", 0) == 900);
    CHECK_THROWS_AS(c.apply_override("novalue"), ConfigError);
    CHECK_THROWS_AS(c.require("absent"), ConfigError);
    c.set("x", "abc");
    CHECK_THROWS_AS(c.get_double("x", 0.0), ConfigError);
    CHECK_THROWS_AS(c.get_int("list", 0), ConfigError);
    CHECK_THROWS_AS(Config::parse_text("just words\n"), ParseError);

    Config fresh = Config::parse_text("a=1\nb=2\n");
    fresh.get_int("a", 0);
    CHECK(fresh.unread() == std::vector<std::string>{"b"});
    CHECK(Config::parse_text(fresh.to_text()).entries() == fresh.entries());
}

TEST_CASE("randomized settings require an explicit seed") {
    Config c;
    try {
        c.require_seed();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("seed") != std::string::npos);
    }
    CHECK_THROWS_AS(mcmc_config_from(c), ConfigError);
    c.set("seed", "-4");
    CHECK_THROWS_AS(c.require_seed(), ConfigError);
    c.set("seed", "42");
    CHECK(c.require_seed() == 42u);
    c.set("mcmc.chains", "3");
    const McmcConfig m = mcmc_config_from(c);
    CHECK(m.chains == 3);
    CHECK(m.seed == 42u);
}

TEST_CASE("model, prior and truth sections round-trip") {
    ModelSpec spec;
    spec.association = AssociationForm::Kind::value_and_slope;
    spec.natural_spline_time = true;
    spec.time_knots = {1.0, 2.0};
    spec.surv_covariates = {"age", "sex"};
    spec.baseline_basis = 9;
    Config c;
    write_model_spec(c, spec);
    const ModelSpec back = model_spec_from(c);
    CHECK(back.association == spec.association);
    CHECK(back.natural_spline_time);
    CHECK(back.time_knots == spec.time_knots);
    CHECK(back.surv_covariates == spec.surv_covariates);
    CHECK(back.baseline_basis == 9);

    c.set("model.association", "area");
    CHECK_THROWS_AS(model_spec_from(c), ConfigError);

    PriorSet p;
    p.beta_variance = 7.0;
    Config pc;
    write_priors(pc, p);
    CHECK(priors_from(pc).beta_variance == 7.0);

    Config sim = Config::parse_text("model.baseline_basis=1\nmodel.baseline_degree=0\nmodel.penalty_order=1\n"
                                    "model.surv_covariates=group\nsim.covariates=group:bernoulli:0.4\n"
                                    "truth.beta=3,0.3\ntruth.D=1,0.1,0.1,0.2\ntruth.gamma=0.5\ntruth.alpha=0.2\n"
                                    "seed=3\n");
    const SimulationDesign d = simulation_design_from(sim);
    CHECK(d.seed == 3u);
    CHECK(d.theta.D(1, 0) == 0.1);
    CHECK(d.covariates.at(0).a == 0.4);
    std::ostringstream out;
    write_truth(out, d.theta, d.model);
    std::istringstream in(out.str());
    const Parameters t = read_truth(in, "truth.txt", d.model);
    CHECK(t.beta == d.theta.beta);
    CHECK(t.D == d.theta.D);
    CHECK(t.gamma_h0 == d.theta.gamma_h0);

    sim.set("truth.beta", "3");
    CHECK_THROWS_AS(simulation_design_from(sim), ConfigError);
}

TEST_CASE("datasets join the two tables") {
    const Dataset d = parse(kLongitudinal, kSurvival);
    REQUIRE(d.subjects.size() == 2u);
    CHECK(d.subjects[0].times == std::vector<double>{0.0, 1.0});
    CHECK(d.subjects[0].covariates.at("group") == 1.0);
    CHECK(d.subjects[1].event == 0);
    CHECK(d.survival_covariates == std::vector<std::string>{"group"});
    // subjects without measurements are fine
    CHECK(parse("", kSurvival).subjects[1].times.empty());
    // quoting, CRLF and a byte-order mark
    const Dataset q = parse("\xEF\xBB\xBFsubject_id,time,value\r\n\"A\",0,1\r\n", "subject_id,event_time,event_indicator\r\n\"A\",2,0\r\n");
    CHECK(q.subjects[0].values == std::vector<double>{1.0});

    std::ostringstream l, s;
    write_dataset(d, l, s);
    const Dataset again = parse(l.str(), s.str());
    CHECK(again.subjects[0].values == d.subjects[0].values);
    CHECK(again.subjects[0].event_time == d.subjects[0].event_time);
}

TEST_CASE("malformed tables report file, line and column") {
    CHECK(parse_error(kLongitudinal, "subject_id,event_time,event_indicator\nA,5,2\n").find("surv.csv:2:3") == 0);
    CHECK(parse_error(kLongitudinal, "subject_id,event_time,event_indicator\nA,-1,1\n").find("surv.csv:2:2") == 0);
    CHECK(parse_error(kLongitudinal, "subject_id,event_time,event_indicator\nA,5,1\nA,6,0\n").find("duplicate") != std::string::npos);
    CHECK(parse_error("subject_id,time,value\nZ,0,1\n", kSurvival).find("long.csv:2:1") == 0);
    CHECK(parse_error("subject_id,time,value\nA,1,1\nA,0.5,1\n", kSurvival).find("not ascending") != std::string::npos);
    CHECK(parse_error("subject_id,time,value\nB,4,1\n", kSurvival).find("after the event") != std::string::npos);
    CHECK(parse_error("subject_id,time,value\nA,x,1\n", kSurvival).find("long.csv:2:2") == 0);
    CHECK(parse_error("subject_id,time,value\nA,0\n", kSurvival).find("long.csv:2") == 0);
    CHECK(parse_error("id,time,value\n", kSurvival).find("long.csv:1") == 0);
    CHECK(parse_error("", "").find("surv.csv") == 0);
    CHECK_THROWS_AS(read_dataset("/nonexistent/l.csv", "/nonexistent/s.csv"), IoError);
}

TEST_CASE("plans and curves round-trip") {
    SchedulePlan p;
    p.t = 0.3;
    p.t_up = 5.3;
    p.grid = {1.3, 2.3};
    p.pi = {0.95, 0.85};
    EklEstimate e;
    e.estimate = -1.25;
    e.lower = -3.0;
    e.upper = 0.0;
    p.ekl = {e, e};
    p.selected = 1;
    p.flags = {"note"};
    std::ostringstream out;
    write_plan(out, p);
    const std::string text = out.str();
    CHECK(text.find("t,t_up_minus_t,u,EKL,EKL_lo,EKL_hi,pi,selected") != std::string::npos);
    std::istringstream in(text);
    const SchedulePlan back = read_plan(in, "plan.csv");
    CHECK(back.grid == p.grid);
    CHECK(back.pi == p.pi);
    CHECK(back.selected == p.selected);
    CHECK(back.t_up == p.t_up);
    CHECK(back.flags == p.flags);
    CHECK(back.ekl[1].estimate == e.estimate);

    std::ostringstream cu;
    write_curve(cu, {1.0, 2.0}, {1.0, 0.5});
    std::istringstream ci(cu.str());
    std::vector<double> u, pi;
    read_curve(ci, "curve.csv", u, pi);
    CHECK(u == std::vector<double>{1.0, 2.0});
    CHECK(pi == std::vector<double>{1.0, 0.5});
}

TEST_CASE("score tables carry one column per landmark") {
    std::ostringstream out;
    write_score_table(out, {2.0, 4.5}, {30, 12}, {ScoreRow{"m1", 100.5, {-1.0, -0.5}}, ScoreRow{"m2", 99.0, {-1.2, -0.4}}});
    std::istringstream in(out.str());
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "model,DIC,cvDCL[t=2],cvDCL[t=4.5],n_t[t=2],n_t[t=4.5]");
    CHECK(first == "m1,100.5,-1,-0.5,30,12");
}

TEST_CASE("fit directories round-trip draws and summaries") {
    SimulationDesign d;
    d.n_subjects = 20;
    d.seed = 1;
    ModelSpec spec;
    spec.baseline_basis = 5;
    d.model = design_model(spec, 10.0);
    Parameters th;
    th.beta = Eigen::Vector2d(1.0, 0.1);
    th.D = Eigen::Matrix2d::Identity();
    th.gamma = Eigen::VectorXd(0);
    th.alpha = Eigen::VectorXd::Constant(1, 0.1);
    th.gamma_h0 = Eigen::VectorXd::Constant(5, -3.0);
    d.theta = th;
    const Dataset data = generate_dataset(d);
    McmcConfig cfg;
    cfg.iterations = 60;
    cfg.burn_in = 20;
    cfg.seed = 2;
    const PosteriorSamples post = fit(data, d.model, PriorSet{}, cfg);
    FitSummary summary;
    summary.dic = dic(post, data);
    summary.converged = post.diagnostics.converged;
    summary.draws = post.size();

    const fs::path dir = scratch_dir("fit");
    save_fit(dir.string(), post, summary, cfg);
    for (const char* f : {"draws.csv", "model.cfg", "diagnostics.txt", "summary.txt"}) CHECK(fs::exists(dir / f));
    const PosteriorSamples back = load_fit(dir.string());
    REQUIRE(back.size() == post.size());
    CHECK(flatten(back.draws.back(), back.model) == flatten(post.draws.back(), post.model));
    CHECK(back.model.baseline.knots() == post.model.baseline.knots());
    CHECK(back.chain == post.chain);
    const FitSummary s = load_fit_summary(dir.string());
    CHECK(s.dic.dic == summary.dic.dic);
    CHECK(s.draws == summary.draws);
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_fit(dir.string()), IoError);
}

TEST_CASE("files are replaced atomically") {
    const fs::path dir = scratch_dir("write");
    fs::create_directories(dir);
    const std::string path = (dir / "x.txt").string();
    write_file(path, "one");
    write_file(path, "two");
    CHECK(read_file(path) == "two");
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
    fs::remove_all(dir);
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(join_doubles({1.0, 2.5}) == "1,2.5");
}
