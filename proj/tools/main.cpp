#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pcnn/baselines.hpp"
#include "pcnn/checkpoint.hpp"
#include "pcnn/config.hpp"
#include "pcnn/errors.hpp"
#include "pcnn/model.hpp"
#include "pcnn/simulator.hpp"
#include "pcnn/training.hpp"
#include "pcnn/verifier.hpp"

namespace fs = std::filesystem;
using namespace pcnn;

namespace {

BuildingTopology topology_for(const RunConfig& cfg, std::size_t zone_count) {
    if (cfg.topology) {
        if (cfg.topology->zone_count() != zone_count)
            throw ConfigError("configured topology zone count does not match the dataset");
        return *cfg.topology;
    }
    return zone_count == 1
               ? BuildingTopology(1, {}, {true})
               : BuildingTopology::chain(zone_count);
}

std::string seeded_path(const std::string& base, std::uint64_t seed, bool multi) {
    if (!multi) return base;
    fs::path p(base);
    fs::path dir = p.parent_path() / ("seed" + std::to_string(seed));
    fs::create_directories(dir);
    return (dir / p.filename()).string();
}

void write_history(const std::string& path, const TrainResult& tr) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "epoch\ttrain_mse\tval_mse\tval_mae\n";
    for (const EpochRow& r : tr.history)
        os << r.epoch << "\t" << format_double(r.train_mse) << "\t" << format_double(r.val_mse)
           << "\t" << format_double(r.val_mae) << "\n";
}

void cmd_simulate(const std::string& config_path, const std::string& out_path) {
    RunConfig cfg = load_run_config(config_path);
    PlantConfig plant = cfg.simulator ? *cfg.simulator : PlantConfig{};
    SimulationResult res = simulate(plant, cfg.controller, cfg.days, cfg.seeds.front());
    save_dataset_csv(res.data, out_path);
    save_truth(res.truth, out_path + ".truth");
}

void train_one(const RunConfig& cfg, const Dataset& data, const std::string& model_kind,
               std::uint64_t seed, const std::string& out_path) {
    BuildingTopology topo = topology_for(cfg, data.zone_count);
    TrainingConfig tc = cfg.training;
    tc.seed = seed;
    SequenceSplit split = build_sequences(data, seed);

    std::unique_ptr<DynamicsModel> model;
    TrainResult tr;
    bool trained = false;
    if (model_kind == "linear") {
        LinearFitConfig fc = cfg.linear_fit;
        fc.seed = seed;
        model = std::make_unique<LinearModel>(fit_linear(data, split.train, topo, fc));
    } else if (model_kind == "res" || model_kind == "res-cons") {
        LinearFitConfig fc = cfg.linear_fit;
        fc.seed = seed;
        LinearModel base = fit_linear(data, split.train, topo, fc);
        auto res = std::make_unique<ResidualModel>(std::move(base), model_kind == "res-cons",
                                                   cfg.residual_hidden, seed);
        ResidualFitConfig rc;
        rc.training = tc;
        rc.targets = cfg.residual_targets;
        fit_residual(*res, data, split.train, rc);
        model = std::move(res);
    } else if (model_kind == "arx") {
        model = std::make_unique<ArxModel>(arx_fit(data, split.train, cfg.arx_delta));
    } else {
        RunConfig mc = cfg;
        mc.model_kind = model_kind;
        if (model_kind == "pinn" && mc.training.pinn_lambda < 0.0) tc.pinn_lambda = 100.0;
        model = make_model(mc, topo, seed);
        tr = train(*model, data, split, tc);
        trained = true;
        if (auto* p = dynamic_cast<PcnnModel*>(model.get());
            p && p->variant() == PcnnVariant::X)
            p->merge_x();
    }

    Checkpoint ck = to_checkpoint(*model);
    ck.meta.emplace_back("seed", std::to_string(seed));
    if (trained) {
        ck.meta.emplace_back("best_val_mse", format_double(tr.best_val_mse));
        ck.meta.emplace_back("best_epoch", std::to_string(tr.best_epoch));
        ck.meta.emplace_back("gradient_mode", "double-backward");
    }
    save_checkpoint(ck, out_path);
    if (trained) write_history(out_path + ".history.tsv", tr);
}

void cmd_train(const std::string& config_path, const std::string& data_path,
               const std::string& model_kind, const std::string& out_path,
               const std::vector<std::uint64_t>& seed_override) {
    RunConfig cfg = load_run_config(config_path);
    if (!seed_override.empty()) cfg.seeds = seed_override;
    Dataset data = load_dataset_csv(data_path);
    const bool multi = cfg.seeds.size() > 1;
    for (std::uint64_t seed : cfg.seeds)
        train_one(cfg, data, model_kind, seed, seeded_path(out_path, seed, multi));
}

void cmd_evaluate(const std::string& ckpt_path, const std::string& data_path,
                  const std::string& out_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    std::unique_ptr<DynamicsModel> model = from_checkpoint(ck);
    Dataset data = load_dataset_csv(data_path);
    std::uint64_t seed = 0;
    if (const std::string* s = ck.find_meta("seed")) seed = std::stoull(*s);
    SequenceSplit split = build_sequences(data, seed);
    const SequenceSet& eval_set = split.val.windows.empty() ? split.train : split.val;
    MetricSummary ms = evaluate_metrics(*model, data, eval_set);
    std::vector<double> horizon = error_by_horizon(*model, data, eval_set);

    std::ofstream os(out_path);
    if (!os) throw DataError("cannot open " + out_path + " for writing");
    os << "pcnn-report v1\n";
    os << "kind " << model->kind() << "\n";
    os << "metric mse " << format_double(ms.mse) << "\n";
    os << "metric mae " << format_double(ms.mae) << "\n";
    os << "metric mape " << format_double(ms.mape) << "\n";
    for (std::size_t h = 0; h < horizon.size(); ++h)
        os << "horizon " << (h + 1) << " " << format_double(horizon[h]) << "\n";
}

void cmd_verify(const std::string& ckpt_path, const std::string& data_path,
                const std::string& out_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    std::unique_ptr<DynamicsModel> model = from_checkpoint(ck);
    Dataset data = load_dataset_csv(data_path);
    std::uint64_t seed = 0;
    if (const std::string* s = ck.find_meta("seed")) seed = std::stoull(*s);
    SequenceSplit split = build_sequences(data, seed);
    const SequenceSet& eval_set = split.val.windows.empty() ? split.train : split.val;

    GradientReport merged;
    std::size_t budget = std::min<std::size_t>(eval_set.windows.size(), 8);
    for (std::size_t i = 0; i < budget; ++i) {
        Window w = eval_set.windows[i];
        if (w.len > 48) w.len = 48;  // bounded verification horizon per window
        SeriesView sv{&data, w};
        GradientReport r = final_step_gradients(*model, sv);
        merged.entries.insert(merged.entries.end(), r.entries.begin(), r.entries.end());
    }
    merged.tally();
    HistogramTable hist = gradient_histogram(merged);

    SeriesView check_sv{&data, eval_set.windows.front()};
    BuildingTopology topo = model->zone_count() == 1
                                ? BuildingTopology(1, {}, {true})
                                : BuildingTopology::chain(model->zone_count());
    if (auto* p = dynamic_cast<PcnnModel*>(model.get())) topo = p->topology();
    else if (auto* l = dynamic_cast<LinearModel*>(model.get())) topo = l->topology();
    else if (auto* r = dynamic_cast<ResidualModel*>(model.get())) topo = r->base().topology();
    else if (auto* b = dynamic_cast<BlackboxModel*>(model.get())) topo = b->topology();
    else if (auto* pp = dynamic_cast<PurePhysicsModel*>(model.get())) topo = pp->topology();

    SeriesView short_sv{&data, {check_sv.window.start, std::min<std::size_t>(check_sv.window.len,
                                                                             kWarmStartSteps + 6)}};
    CheckResult heat = check_heat_propagation(*model, topo, check_sv, 6);
    CheckResult input = check_input_consistency(*model, topo, short_sv);

    std::ofstream os(out_path);
    if (!os) throw DataError("cannot open " + out_path + " for writing");
    os << "pcnn-report v1\n";
    os << "kind " << model->kind() << "\n";
    os << "verify negative " << merged.negative << "\n";
    os << "verify zero " << merged.zero << "\n";
    os << "verify positive " << merged.positive << "\n";
    os << "verify negative_fraction " << format_double(hist.negative_fraction) << "\n";
    os << "verify heat_propagation " << (heat.pass ? "pass" : "fail") << "\n";
    os << "verify input_consistency " << (input.pass ? "pass" : "fail") << "\n";
    for (const ConsistencyFailure& f : heat.failures)
        os << "failure heat zone " << (f.out_zone + 1) << " from " << (f.in_zone + 1) << " lag "
           << f.lag << " value " << format_double(f.value) << " " << f.reason << "\n";
    for (const ConsistencyFailure& f : input.failures)
        os << "failure input kind " << to_string(f.kind) << " zone " << (f.out_zone + 1)
           << " from " << (f.in_zone + 1) << " hops " << f.lag << " value "
           << format_double(f.value) << " " << f.reason << "\n";
    os << histogram_to_tsv(hist);
}

void cmd_compare(const std::vector<std::string>& reports, const std::string& out_path) {
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot open " + out_path + " for writing");
    os << "report\tkind\tmse\tmae\tmape\tnegative\theat_propagation\tinput_consistency\n";
    for (const std::string& rp : reports) {
        std::ifstream is(rp);
        if (!is) throw DataError("cannot open report " + rp);
        std::string line, kind = "?", mse = "-", mae = "-", mape = "-", neg = "-", heat = "-",
                          input = "-";
        if (!std::getline(is, line) || line != "pcnn-report v1")
            throw DataError("not a report file: " + rp);
        while (std::getline(is, line)) {
            std::istringstream ls(line);
            std::string a, b, c;
            ls >> a >> b >> c;
            if (a == "kind") kind = b;
            else if (a == "metric" && b == "mse") mse = c;
            else if (a == "metric" && b == "mae") mae = c;
            else if (a == "metric" && b == "mape") mape = c;
            else if (a == "verify" && b == "negative") neg = c;
            else if (a == "verify" && b == "heat_propagation") heat = c;
            else if (a == "verify" && b == "input_consistency") input = c;
        }
        os << fs::path(rp).filename().string() << "\t" << kind << "\t" << mse << "\t" << mae
           << "\t" << mape << "\t" << neg << "\t" << heat << "\t" << input << "\n";
    }
}

void cmd_whatif(const std::string& ckpt_path, const std::string& data_path, std::size_t zone,
                const std::string& pattern, const std::string& out_path) {
    if (pattern != "heat" && pattern != "cool" && pattern != "off")
        throw ConfigError("whatif: pattern must be heat, cool or off");
    Checkpoint ck = load_checkpoint(ckpt_path);
    std::unique_ptr<DynamicsModel> model = from_checkpoint(ck);
    Dataset data = load_dataset_csv(data_path);
    if (zone < 1 || zone > data.zone_count) throw ConfigError("whatif: zone out of range");
    std::uint64_t seed = 0;
    if (const std::string* s = ck.find_meta("seed")) seed = std::stoull(*s);
    SequenceSplit split = build_sequences(data, seed);
    const SequenceSet& eval_set = split.val.windows.empty() ? split.train : split.val;
    Window w = eval_set.windows.front();
    if (w.len > 96) w.len = 96;

    double level = pattern == "heat" ? 500.0 : pattern == "cool" ? -500.0 : 0.0;
    for (std::size_t k = w.start + kWarmStartSteps - 1; k < w.start + w.len; ++k)
        for (std::size_t z = 0; z < data.zone_count; ++z)
            data.u[k][z] = z == zone - 1 ? level : 0.0;

    SeriesView sv{&data, w};
    Trace tr = model->rollout(sv);
    std::ofstream os(out_path);
    if (!os) throw DataError("cannot open " + out_path + " for writing");
    os << "step";
    for (std::size_t z = 1; z <= data.zone_count; ++z) os << "\tT_" << z;
    os << "\n";
    for (std::size_t k = 0; k < sv.len(); ++k) {
        os << k;
        for (std::size_t z = 0; z < data.zone_count; ++z)
            os << "\t" << format_double(tr.T[k][z]);
        os << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physically consistent building thermal models"};
    app.require_subcommand(1);

    std::string config_path, data_path, ckpt_path, out_path, model_kind, pattern = "heat";
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> reports;
    std::size_t zone = 1;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset + truth sidecar");
    sim->add_option("--config", config_path)->required();
    sim->add_option("--out", out_path)->required();

    auto* tr = app.add_subcommand("train", "fit a model and write a checkpoint");
    tr->add_option("--config", config_path)->required();
    tr->add_option("--data", data_path)->required();
    tr->add_option("--model", model_kind,
                   "x-pcnn|m-pcnn|s-pcnn|linear|res|res-cons|arx|blackbox|pinn")
        ->required();
    tr->add_option("--out", out_path)->required();
    tr->add_option("--seeds", seeds);

    auto* ev = app.add_subcommand("evaluate", "metric + error-by-horizon report");
    ev->add_option("--ckpt", ckpt_path)->required();
    ev->add_option("--data", data_path)->required();
    ev->add_option("--out", out_path)->required();

    auto* ve = app.add_subcommand("verify", "gradient sign-structure report");
    ve->add_option("--ckpt", ckpt_path)->required();
    ve->add_option("--data", data_path)->required();
    ve->add_option("--out", out_path)->required();

    auto* co = app.add_subcommand("compare", "merge reports into one table");
    co->add_option("--reports", reports)->required();
    co->add_option("--out", out_path)->required();

    auto* wi = app.add_subcommand("whatif", "counterfactual power-pattern trace");
    wi->add_option("--ckpt", ckpt_path)->required();
    wi->add_option("--data", data_path)->required();
    wi->add_option("--zone", zone)->required();
    wi->add_option("--pattern", pattern, "heat|cool|off");
    wi->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) cmd_simulate(config_path, out_path);
        else if (tr->parsed()) cmd_train(config_path, data_path, model_kind, out_path, seeds);
        else if (ev->parsed()) cmd_evaluate(ckpt_path, data_path, out_path);
        else if (ve->parsed()) cmd_verify(ckpt_path, data_path, out_path);
        else if (co->parsed()) cmd_compare(reports, out_path);
        else if (wi->parsed()) cmd_whatif(ckpt_path, data_path, zone, pattern, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "error code=2 kind=config msg=\"" << e.what() << "\"\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error code=3 kind=data msg=\"" << e.what() << "\"\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error code=4 kind=numeric msg=\"" << e.what() << "\"\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error code=4 kind=numeric msg=\"" << e.what() << "\"\n";
        return 4;
    }
    return 0;
}
