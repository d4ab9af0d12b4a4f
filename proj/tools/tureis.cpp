#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tureis/evaluate.hpp"
#include "tureis/faults.hpp"
#include "tureis/model.hpp"
#include "tureis/runtime.hpp"
#include "tureis/synth.hpp"
#include "tureis/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tureis;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    return json::parse(read_file(path));
}

SynthConfig synth_config_from(const json& cfg, uint64_t seed) {
    SynthConfig sc;
    sc.seed = seed;
    if (!cfg.contains("synth")) return sc;
    const json& s = cfg["synth"];
    sc.n_rooms = s.value("n_rooms", sc.n_rooms);
    sc.binary_per_room = s.value("binary_per_room", sc.binary_per_room);
    sc.numeric_channels = s.value("numeric_channels", sc.numeric_channels);
    sc.n_residents = s.value("n_residents", sc.n_residents);
    sc.duration_hours = s.value("duration_hours", sc.duration_hours);
    sc.dwell_mean_min = s.value("dwell_mean_min", sc.dwell_mean_min);
    sc.pair_rate_per_min = s.value("pair_rate_per_min", sc.pair_rate_per_min);
    sc.ar_coeff = s.value("ar_coeff", sc.ar_coeff);
    sc.noise_sigma = s.value("noise_sigma", sc.noise_sigma);
    sc.sinusoid_amplitude = s.value("sinusoid_amplitude", sc.sinusoid_amplitude);
    sc.numeric_base = s.value("numeric_base", sc.numeric_base);
    sc.numeric_period_s = s.value("numeric_period_s", sc.numeric_period_s);
    sc.sawtooth_step = s.value("sawtooth_step", sc.sawtooth_step);
    return sc;
}

TrainConfig train_config_from(const json& cfg, uint64_t seed) {
    TrainConfig tc;
    tc.seed = seed;
    if (!cfg.contains("model")) return tc;
    const json& m = cfg["model"];
    tc.learning_rate = m.value("learning_rate", tc.learning_rate);
    tc.epochs = m.value("epochs", tc.epochs);
    tc.batch_size = m.value("batch_size", tc.batch_size);
    tc.p_mask = m.value("p_mask", tc.p_mask);
    tc.focal_gamma = m.value("focal_gamma", tc.focal_gamma);
    tc.dropout_rate = m.value("dropout_rate", tc.dropout_rate);
    return tc;
}

ParsedTrace load_trace(const std::string& trace_path, const std::string& schema_path) {
    if (!schema_path.empty()) {
        HomeSchema schema = HomeSchema::from_json(read_file(schema_path));
        return parse_trace(read_file(trace_path), &schema);
    }
    return parse_trace(read_file(trace_path));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tureis: sensor failure detection toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    uint64_t seed = 1;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "master RNG seed");
    app.add_option("--out", out_dir, "output directory");

    // gen-trace
    auto* gen = app.add_subcommand("gen-trace", "generate a synthetic home trace");
    double gen_hours = 0.0;
    gen->add_option("--hours", gen_hours, "trace duration (overrides config)");

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "compute per-sensor encoding stats");
    std::string cal_trace, cal_schema;
    cal->add_option("--trace", cal_trace, "trace file")->required();
    cal->add_option("--schema", cal_schema, "schema JSON (inferred if absent)");

    // train
    auto* trn = app.add_subcommand("train", "train the masked-reconstruction encoder");
    std::string trn_trace, trn_schema, trn_stats;
    trn->add_option("--trace", trn_trace, "training trace")->required();
    trn->add_option("--schema", trn_schema, "schema JSON");
    trn->add_option("--stats", trn_stats, "stats JSON (computed from trace if absent)");

    // calibrate-thresholds
    auto* thr = app.add_subcommand("calibrate-thresholds",
                                   "set per-sensor baselines from a clean stream");
    std::string thr_trace, thr_model;
    thr->add_option("--trace", thr_trace, "clean validation trace")->required();
    thr->add_option("--model", thr_model, "model checkpoint")->required();

    // inject
    auto* inj = app.add_subcommand("inject", "apply a fault plan to a trace");
    std::string inj_trace, inj_schema, inj_plan;
    inj->add_option("--trace", inj_trace, "input trace")->required();
    inj->add_option("--schema", inj_schema, "schema JSON");
    inj->add_option("--plan", inj_plan, "fault plan JSON")->required();

    // run
    auto* run = app.add_subcommand("run", "stream inference over a trace");
    std::string run_trace, run_model, run_baselines;
    run->add_option("--trace", run_trace, "input trace")->required();
    run->add_option("--model", run_model, "model checkpoint")->required();
    run->add_option("--baselines", run_baselines, "baselines JSON")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "full protocol experiment");
    std::string ev_trace, ev_schema, ev_mode = "single";
    ev->add_option("--trace", ev_trace, "trace (synthetic home generated if absent)");
    ev->add_option("--schema", ev_schema, "schema JSON");
    ev->add_option("--mode", ev_mode, "single|multi")
        ->check(CLI::IsMember({"single", "multi"}));

    // coactivation-gap
    auto* co = app.add_subcommand("coactivation-gap",
                                  "coactivation probability gap vs window length");
    std::string co_trace, co_schema;
    int co_max_len = 10;
    co->add_option("--trace", co_trace, "trace file")->required();
    co->add_option("--schema", co_schema, "schema JSON");
    co->add_option("--max-len", co_max_len, "max window length to scan");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    int gc_trials = 3;
    gc->add_option("--trials", gc_trials, "number of random models");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        fs::path out(out_dir);
        json cfg = load_config(config_path);

        if (*gen) {
            SynthConfig sc = synth_config_from(cfg, seed);
            if (gen_hours > 0.0) sc.duration_hours = gen_hours;
            SyntheticHome home = generate_synthetic_trace(sc);
            write_file(out / "trace.log", serialize_trace(home.trace));
            write_file(out / "schema.json", home.schema.to_json());
            std::cout << "wrote " << (out / "trace.log").string() << " ("
                      << home.trace.events.size() << " events, " << sc.duration_hours
                      << " h)\n";
        } else if (*cal) {
            ParsedTrace pt = load_trace(cal_trace, cal_schema);
            StatsMap stats = calibrate_stats(pt.trace, pt.schema);
            write_file(out / "stats.json", stats_to_json(stats));
            write_file(out / "schema.json", pt.schema.to_json());
            std::cout << "wrote " << (out / "stats.json").string() << "\n";
        } else if (*trn) {
            ParsedTrace pt = load_trace(trn_trace, trn_schema);
            StatsMap stats = trn_stats.empty() ? calibrate_stats(pt.trace, pt.schema)
                                               : stats_from_json(read_file(trn_stats));
            auto windows = encode_stream(pt.trace, stats, pt.schema);
            TrainConfig tc = train_config_from(cfg, seed);
            TrainResult res = train(windows, pt.schema, tc);
            write_file(out / "model.ckpt", save_checkpoint(res.params, pt.schema, stats));
            std::cout << "trained on " << windows.size() << " windows; final epoch loss "
                      << res.epoch_loss.back() << "\n";
        } else if (*thr) {
            Checkpoint ck = load_checkpoint(read_file(thr_model));
            ParsedTrace pt = load_trace(thr_trace, "");
            auto windows = encode_stream(pt.trace, ck.stats, ck.schema);
            Baselines b = calibrate_baselines(ck.params, windows, ck.schema);
            write_file(out / "baselines.json", baselines_to_json(b));
            std::cout << "wrote " << (out / "baselines.json").string() << "\n";
        } else if (*inj) {
            ParsedTrace pt = load_trace(inj_trace, inj_schema);
            auto plan = fault_plan_from_json(read_file(inj_plan));
            ProfileMap profiles = profile_channels(pt.trace, pt.schema);
            Trace cur = pt.trace;
            int total = 0;
            for (const auto& spec : plan) {
                auto res = inject(cur, pt.schema, spec, profiles.at(spec.sensor_id));
                cur = res.trace;
                total += res.injected_event_count;
            }
            write_file(out / "injected.log", serialize_trace(cur));
            std::cout << "applied " << plan.size() << " faults (" << total
                      << " events touched)\n";
        } else if (*run) {
            Checkpoint ck = load_checkpoint(read_file(run_model));
            Baselines b = baselines_from_json(read_file(run_baselines));
            ParsedTrace pt = load_trace(run_trace, "");
            VerdictLog log = run_stream(ck.params, ck.stats, b, ck.schema, pt.trace);
            write_file(out / "verdicts.csv",
                       verdicts_csv_header() + verdicts_to_csv_rows("stream", log));
            std::cout << log.verdicts.size() << " verdicts\n";
        } else if (*ev) {
            Trace trace;
            HomeSchema schema;
            if (!ev_trace.empty()) {
                ParsedTrace pt = load_trace(ev_trace, ev_schema);
                trace = pt.trace;
                schema = pt.schema;
            } else {
                SynthConfig sc = synth_config_from(cfg, seed);
                if (!cfg.contains("synth")) sc.duration_hours = 78.0;
                SyntheticHome home = generate_synthetic_trace(sc);
                trace = home.trace;
                schema = home.schema;
            }
            ExperimentConfig ec;
            ec.mode = ev_mode == "multi" ? ExperimentMode::Multi : ExperimentMode::Single;
            ec.seeds = {seed};
            ec.train = train_config_from(cfg, seed);
            MetricsReport report = run_experiment(trace, schema, ec);
            write_file(out / "report.json", report_to_json(report));
            write_file(out / "report.csv", report_to_csv(report));
            write_file(out / "verdicts.csv", report.verdicts_csv);
            std::cout << report_to_json(report) << "\n";
        } else if (*co) {
            ParsedTrace pt = load_trace(co_trace, co_schema);
            std::vector<SensorPair> correlated, uncorrelated;
            if (cfg.contains("pairs")) {
                for (const auto& p : cfg["pairs"].value("correlated", json::array()))
                    correlated.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
                for (const auto& p : cfg["pairs"].value("uncorrelated", json::array()))
                    uncorrelated.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
            }
            if (correlated.empty() || uncorrelated.empty())
                throw std::runtime_error(
                    "config must list pairs.correlated and pairs.uncorrelated");
            for (int len = 1; len <= co_max_len; ++len)
                std::cout << "L=" << len << " gap="
                          << coactivation_gap(pt.trace, pt.schema, correlated,
                                              uncorrelated, len)
                          << "\n";
        } else if (*gc) {
            double worst = 0.0;
            Rng rng(seed);
            for (int t = 0; t < gc_trials; ++t) {
                int dim = t % 2 == 0 ? 6 : 12;
                worst = std::max(worst, gradient_check_max_rel_err(dim, rng.next_u64()));
            }
            std::cout << "max relative gradient error: " << worst << "\n";
            return worst < 1e-3 ? 0 : 2;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
