#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "subgroupte/baseline.hpp"
#include "subgroupte/io.hpp"
#include "subgroupte/metrics.hpp"
#include "subgroupte/model.hpp"
#include "subgroupte/rng.hpp"
#include "subgroupte/subgroup.hpp"
#include "subgroupte/synthdata.hpp"
#include "subgroupte/train.hpp"

namespace {

using nlohmann::json;
using namespace subgroupte;

constexpr double kBaselineLambda = 1e-3;

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

void write_json_atomic(const std::string& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

std::string manifest_path(const std::string& out) {
    std::filesystem::path p(out);
    p.replace_extension(".manifest.json");
    return p.string();
}

// config + seed + results: everything needed to reproduce the run
void write_manifest(const std::string& out, const std::string& command, const json& config,
                    std::uint64_t seed, const json& results) {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = seed;
    m["results"] = results;
    write_json_atomic(manifest_path(out), m);
}

json config_json(const TrainConfig& cfg) {
    return json{{"alpha", cfg.alpha},
                {"beta", cfg.beta},
                {"gamma", cfg.gamma},
                {"k", cfg.k},
                {"lr", cfg.lr},
                {"batch", cfg.batch_size},
                {"epochs", cfg.max_epochs},
                {"patience", cfg.patience},
                {"hidden", cfg.hidden_dim},
                {"seed", cfg.seed}};
}

struct GenerateArgs {
    GenConfig cfg;
    std::string out;
};

void run_generate(const GenerateArgs& a) {
    const SyntheticDataset ds = generate(a.cfg);
    save_csv(ds.data, a.out);

    double ate = 0.0;
    for (double v : ds.data.te) ate += v;
    ate /= static_cast<double>(ds.data.n);

    const json cfg{{"n", a.cfg.n},          {"treated", a.cfg.n_treated},
                   {"seed", a.cfg.seed},    {"x0-mean", a.cfg.x0_mean},
                   {"x0-std", a.cfg.x0_std}, {"noise-var", a.cfg.noise_var},
                   {"out", a.out}};
    write_manifest(a.out, "generate", cfg, a.cfg.seed,
                   json{{"rows", ds.data.n}, {"ate", ate}, {"beta", ds.beta}});
}

struct TrainArgs {
    std::string data;
    TrainConfig cfg;
    std::string out;
    std::string log;
};

void run_train(const TrainArgs& a) {
    const Dataset data = load_csv(a.data, false);

    std::ofstream log_stream;
    LogSink sink;
    if (!a.log.empty()) {
        log_stream.open(a.log, std::ios::trunc);
        if (!log_stream) throw std::runtime_error("cannot open '" + a.log + "' for writing");
        sink = make_ndjson_sink(log_stream);
    }

    FitResult fitres = fit(data, a.cfg, sink);
    save_checkpoint({fitres.model, a.cfg, fitres.best_val_mse}, a.out);

    json cfg = config_json(a.cfg);
    cfg["data"] = a.data;
    cfg["out"] = a.out;
    cfg["log"] = a.log;
    write_manifest(a.out, "train", cfg, a.cfg.seed,
                   json{{"best_val_mse", fitres.best_val_mse},
                        {"epochs_run", fitres.log.size()},
                        {"centroids", fitres.model.centroids.mu}});
}

struct PathArgs {
    std::string model;
    std::string data;
    std::string out;
};

void run_eval(const PathArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.model);
    const Dataset data = load_csv(a.data, false);
    const std::vector<std::size_t> rows = all_rows(data.n);
    const EvalResult res = evaluate(ckpt.model, data, rows);

    json out;
    out["factual_mse"] = res.factual_mse;
    out["pehe"] = res.pehe ? json(*res.pehe) : json(nullptr);
    out["eps_ate"] = res.eps_ate ? json(*res.eps_ate) : json(nullptr);
    out["n"] = data.n;

    if (data.has_oracle) {
        try {
            const TLearner bl = fit_tlearner(data, rows, kBaselineLambda);
            const std::vector<double> te_bl = predict_te(bl, data.covariates(rows));
            std::vector<double> y0h(data.n), y1h(data.n);
            for (std::size_t i = 0; i < data.n; ++i) {
                y0h[i] = predict_arm(bl, data.covariates(rows).row(i), 0);
                y1h[i] = y0h[i] + te_bl[i];
            }
            out["baseline"] = json{{"lambda", kBaselineLambda},
                                   {"pehe", pehe(te_bl, data.te)},
                                   {"eps_ate", eps_ate(y1h, y0h, data.te)}};
        } catch (const std::exception& e) {
            out["baseline"] = nullptr;
            out["baseline_error"] = e.what();
        }
    } else {
        out["baseline"] = nullptr;
    }

    write_json_atomic(a.out, out);
    write_manifest(a.out, "eval",
                   json{{"model", a.model}, {"data", a.data}, {"out", a.out}},
                   ckpt.config.seed, out);
}

void run_report(const PathArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.model);
    const Dataset data = load_csv(a.data, false);
    const std::vector<std::size_t> rows = all_rows(data.n);

    ForwardCache cache;
    const ModelOutput mo = forward_full(ckpt.model, data.covariates(rows), cache);
    std::vector<double> te_hat(data.n);
    for (std::size_t i = 0; i < data.n; ++i) te_hat[i] = mo.y1[i] - mo.y0[i];
    const Assignment assign = hard_assign(mo.te_pre, ckpt.model.centroids.mu);

    const auto summary = subgroup_summary(te_hat, assign, ckpt.model.K);

    json groups = json::array();
    for (std::size_t k = 0; k < summary.groups.size(); ++k) {
        const SubgroupStats& g = summary.groups[k];
        groups.push_back(json{{"subgroup", k},
                              {"n", g.n},
                              {"mean_te", g.present ? json(g.mean_te) : json(nullptr)},
                              {"p5", g.present ? json(g.p5) : json(nullptr)},
                              {"p25", g.present ? json(g.p25) : json(nullptr)},
                              {"p50", g.present ? json(g.p50) : json(nullptr)},
                              {"p75", g.present ? json(g.p75) : json(nullptr)},
                              {"p95", g.present ? json(g.p95) : json(nullptr)}});
    }

    std::filesystem::path assign_path(a.out);
    assign_path.replace_extension(".assignments.csv");
    {
        std::ostringstream os;
        os << "id,subgroup,te_hat\n";
        for (std::size_t i = 0; i < data.n; ++i)
            os << data.id[i] << ',' << assign.labels[i] << ',' << format_double(te_hat[i])
               << '\n';
        write_text_atomic(assign_path.string(), os.str());
    }

    json out;
    out["k"] = ckpt.model.K;
    out["centroids"] = ckpt.model.centroids.mu;
    out["variance_ratio"] = summary.between_group_variance_ratio;
    out["subgroups"] = std::move(groups);
    out["assignments_csv"] = assign_path.string();
    write_json_atomic(a.out, out);

    write_manifest(a.out, "report",
                   json{{"model", a.model}, {"data", a.data}, {"out", a.out}},
                   ckpt.config.seed, out);
}

struct SweepArgs {
    std::string config;
    std::string out_dir;
};

TrainConfig sweep_base_config(const json& j) {
    TrainConfig cfg;
    cfg.lr = j.value("lr", cfg.lr);
    cfg.batch_size = j.value("batch", cfg.batch_size);
    cfg.max_epochs = j.value("epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.hidden_dim = j.value("hidden", cfg.hidden_dim);
    return cfg;
}

void run_sweep(const SweepArgs& a) {
    std::ifstream is(a.config);
    if (!is) throw std::invalid_argument("cannot open '" + a.config + "'");
    json cfg;
    try {
        cfg = json::parse(is);
    } catch (const json::exception& e) {
        throw std::invalid_argument("sweep config '" + a.config + "': " + e.what());
    }

    const std::string data_path = cfg.at("data").get<std::string>();
    const auto alphas = cfg.value("alphas", std::vector<double>{1.0});
    const auto betas = cfg.value("betas", std::vector<double>{1.0});
    const auto gammas = cfg.value("gammas", std::vector<double>{1.0});
    const auto ks = cfg.value("ks", std::vector<std::size_t>{3});
    const auto seed = cfg.value("seed", std::uint64_t{0});
    const auto jobs = std::max<std::size_t>(1, cfg.value("jobs", std::size_t{1}));

    for (double v : alphas)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("sweep: alphas must lie in [0, 1]");
    for (double v : betas)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("sweep: betas must lie in [0, 1]");
    for (double v : gammas)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("sweep: gammas must lie in [0, 1]");
    for (std::size_t k : ks)
        if (k < 1 || k > 10) throw std::invalid_argument("sweep: ks must lie in [1, 10]");

    const Dataset data = load_csv(data_path, false);
    const TrainConfig base = sweep_base_config(cfg);

    struct Trial {
        TrainConfig cfg;
    };
    std::vector<Trial> trials;
    for (std::size_t k : ks)
        for (double alpha : alphas)
            for (double beta : betas)
                for (double gamma : gammas) {
                    TrainConfig tc = base;
                    tc.k = k;
                    tc.alpha = alpha;
                    tc.beta = beta;
                    tc.gamma = gamma;
                    tc.seed = derive_seed(seed, trials.size());
                    trials.push_back({tc});
                }

    std::filesystem::create_directories(a.out_dir);

    std::vector<json> records(trials.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trials.size()) return;
            {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (first_error) return;
            }
            try {
                const TrainConfig& tc = trials[i].cfg;
                FitResult fr = fit(data, tc);
                const EvalResult res = evaluate(fr.model, data, fr.split.test);
                json rec = config_json(tc);
                rec["trial"] = i;
                rec["best_val_mse"] = fr.best_val_mse;
                rec["epochs_run"] = fr.log.size();
                rec["test_factual_mse"] = res.factual_mse;
                rec["pehe"] = res.pehe ? json(*res.pehe) : json(nullptr);
                rec["eps_ate"] = res.eps_ate ? json(*res.eps_ate) : json(nullptr);
                records[i] = std::move(rec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < std::min(jobs, trials.size()); ++j)
            pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    const json results = json(records);
    const std::string results_path = (std::filesystem::path(a.out_dir) / "results.json").string();
    write_json_atomic(results_path, results);

    json m;
    m["command"] = "sweep";
    m["config"] = cfg;
    m["seed"] = seed;
    m["results"] = json{{"trials", trials.size()}, {"results_path", results_path}};
    write_json_atomic((std::filesystem::path(a.out_dir) / "manifest.json").string(), m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"subgroup discovery with treatment-effect estimation"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("generate", "write a synthetic benchmark CSV");
    cmd_gen->add_option("--n", gen.cfg.n, "samples");
    cmd_gen->add_option("--treated", gen.cfg.n_treated, "treated count");
    cmd_gen->add_option("--seed", gen.cfg.seed, "master seed");
    cmd_gen->add_option("--out", gen.out, "output CSV path")->required();
    cmd_gen->add_option("--x0-mean", gen.cfg.x0_mean, "time-covariate mean");
    cmd_gen->add_option("--x0-std", gen.cfg.x0_std, "time-covariate std");
    cmd_gen->add_option("--noise-var", gen.cfg.noise_var, "outcome noise variance");

    TrainArgs tr;
    CLI::App* cmd_train = app.add_subcommand("train", "fit the model on a CSV");
    cmd_train->add_option("--data", tr.data, "input CSV")->required();
    cmd_train->add_option("--k", tr.cfg.k, "number of subgroups");
    cmd_train->add_option("--alpha", tr.cfg.alpha, "propensity loss weight");
    cmd_train->add_option("--beta", tr.cfg.beta, "pre-estimation loss weight");
    cmd_train->add_option("--gamma", tr.cfg.gamma, "subgroup-informed loss weight");
    cmd_train->add_option("--lr", tr.cfg.lr, "learning rate");
    cmd_train->add_option("--batch", tr.cfg.batch_size, "mini-batch size");
    cmd_train->add_option("--epochs", tr.cfg.max_epochs, "epoch budget");
    cmd_train->add_option("--patience", tr.cfg.patience, "early-stopping patience");
    cmd_train->add_option("--hidden", tr.cfg.hidden_dim, "hidden width");
    cmd_train->add_option("--seed", tr.cfg.seed, "master seed");
    cmd_train->add_option("--out", tr.out, "checkpoint path")->required();
    cmd_train->add_option("--log", tr.log, "per-epoch NDJSON log path");

    PathArgs ev;
    CLI::App* cmd_eval = app.add_subcommand("eval", "metrics for a checkpoint on a CSV");
    cmd_eval->add_option("--model", ev.model, "checkpoint path")->required();
    cmd_eval->add_option("--data", ev.data, "input CSV")->required();
    cmd_eval->add_option("--out", ev.out, "metrics JSON path")->required();

    PathArgs rep;
    CLI::App* cmd_report = app.add_subcommand("report", "per-subgroup effect distributions");
    cmd_report->add_option("--model", rep.model, "checkpoint path")->required();
    cmd_report->add_option("--data", rep.data, "input CSV")->required();
    cmd_report->add_option("--out", rep.out, "subgroup JSON path")->required();

    SweepArgs sw;
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "grid search over loss weights and K");
    cmd_sweep->add_option("--config", sw.config, "sweep config JSON")->required();
    cmd_sweep->add_option("--out", sw.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(cmd_gen)) run_generate(gen);
        else if (app.got_subcommand(cmd_train)) run_train(tr);
        else if (app.got_subcommand(cmd_eval)) run_eval(ev);
        else if (app.got_subcommand(cmd_report)) run_report(rep);
        else run_sweep(sw);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
