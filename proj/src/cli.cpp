#include "hapnet/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "hapnet/baselines.hpp"
#include "hapnet/datagen.hpp"
#include "hapnet/errors.hpp"
#include "hapnet/eval.hpp"

namespace hapnet {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        if (v < INT32_MIN || v > INT32_MAX) throw std::out_of_range("int range");
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
        size_t pos = 0;
        const uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

} // namespace

void apply_config_file(const std::string& path, ModelConfig& mc, TrainConfig& tc) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");

        if (key == "d") mc.d = parse_int(key, value);
        else if (key == "n_e") mc.n_e = parse_int(key, value);
        else if (key == "n_u") mc.n_u = parse_int(key, value);
        else if (key == "n_s") mc.n_s = parse_int(key, value);
        else if (key == "n_v") mc.n_v = parse_int(key, value);
        else if (key == "n_z") mc.n_z = parse_int(key, value);
        else if (key == "h") mc.h = parse_int(key, value);
        else if (key == "routing_iters") mc.routing_iters = parse_int(key, value);
        else if (key == "heads") mc.heads = parse_int(key, value);
        else if (key == "beta") mc.beta = parse_double(key, value);
        else if (key == "head_hidden") mc.head_hidden = parse_int(key, value);
        else if (key == "decoder_hidden") mc.decoder_hidden = parse_int(key, value);
        else if (key == "seed") {
            mc.seed = parse_u64(key, value);
            tc.seed = mc.seed;
        } else if (key == "learning_rate") tc.learning_rate = parse_double(key, value);
        else if (key == "epochs") tc.epochs = parse_int(key, value);
        else if (key == "batch_size") tc.batch_size = parse_int(key, value);
        else if (key == "optimizer") tc.optimizer = value;
        else if (key == "patience") tc.patience = parse_int(key, value);
        else if (key == "ablation") tc.ablation = ablation_from_string(value);
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> seeds;
    size_t at = 0;
    while (at <= text.size()) {
        const size_t comma = text.find(',', at);
        const std::string tok =
            trim(comma == std::string::npos ? text.substr(at) : text.substr(at, comma - at));
        if (tok.empty()) throw ConfigError("--seeds: empty entry in '" + text + "'");
        seeds.push_back(parse_u64("seeds", tok));
        if (comma == std::string::npos) break;
        at = comma + 1;
    }
    if (seeds.empty()) throw ConfigError("--seeds: no seeds given");
    return seeds;
}

struct GenDataArgs {
    int events = 0;
    int subjects_per_cluster = 0;
    int dim = 25;
    uint64_t seed = 1;
    double noise_std = 1.0;
    bool linear_tau = false;
    std::string out_path;
};

struct TrainArgs {
    std::string data_path, config_path, ablation = "full", out_path;
    uint64_t seed = 1;
};

struct EvalArgs {
    std::string data_path, ckpt_path, split = "test", report_path;
};

struct AblateArgs {
    std::string data_path, config_path, seeds_text, out_dir;
};

struct ReportArgs {
    std::string eval_path, csv_dir;
};

int run_gen_data(const GenDataArgs& a, std::ostream& out) {
    SyntheticConfig cfg;
    cfg.n_e = a.events;
    cfg.d = a.dim;
    cfg.subjects_per_cluster = a.subjects_per_cluster;
    cfg.seed = a.seed;
    cfg.noise_std = a.noise_std;
    cfg.linear_tau = a.linear_tau;
    cfg.validate();

    Dataset data = generate(cfg, ExecMode::parallel);
    assign_splits(data, a.seed);
    save_dataset(data, a.out_path);

    std::set<std::string> clusters;
    for (const SubjectRecord& rec : data.records) clusters.insert(rec.cluster.label());
    out << "wrote " << data.records.size() << " records across " << clusters.size()
        << " clusters to " << a.out_path << " (train=" << count_split(data, Split::train)
        << " valid=" << count_split(data, Split::valid)
        << " test=" << count_split(data, Split::test) << ")\n";
    return 0;
}

int run_train(const TrainArgs& a, bool seed_given, bool ablation_given, std::ostream& out) {
    const Dataset data = load_dataset(a.data_path);
    ModelConfig mc;
    TrainConfig tc;
    mc.d = data.meta.d;
    mc.n_e = data.meta.n_e;
    if (!a.config_path.empty()) apply_config_file(a.config_path, mc, tc);
    if (ablation_given) tc.ablation = ablation_from_string(a.ablation);
    if (seed_given) {
        mc.seed = a.seed;
        tc.seed = a.seed;
    }

    const TrainRun run = train(data, mc, tc, ExecMode::parallel, &out);
    save_checkpoint(run.model, a.out_path);
    out << "best_epoch=" << run.best_epoch << " best_valid_mape=" << run.best_valid_mape
        << " epochs_run=" << run.epochs_run << "\ncheckpoint=" << a.out_path << '\n';
    return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
    const Dataset data = load_dataset(a.data_path);
    const Model model = load_checkpoint(a.ckpt_path);
    const Split split = split_from_string(a.split);
    const EvalReport rep = evaluate(model, data, split, ExecMode::parallel);
    save_report(rep, a.report_path);
    out << "split=" << to_string(split) << " count=" << rep.count << " mape_mean=" << rep.mape_mean
        << " mape_stderr=" << rep.mape_stderr << "\nreport=" << a.report_path << '\n';
    return 0;
}

int run_ablate(const AblateArgs& a, std::ostream& out) {
    const Dataset data = load_dataset(a.data_path);
    ModelConfig mc;
    TrainConfig tc;
    mc.d = data.meta.d;
    mc.n_e = data.meta.n_e;
    if (!a.config_path.empty()) apply_config_file(a.config_path, mc, tc);
    const std::vector<uint64_t> seeds = parse_seed_list(a.seeds_text);

    ablation_suite(data, mc, tc, seeds, a.out_dir, ExecMode::parallel, &out);
    out << "summary=" << a.out_dir << "/summary.json\n";
    return 0;
}

int run_report(const ReportArgs& a, std::ostream& out) {
    const EvalReport rep = load_report(a.eval_path);
    write_report_csv(rep, a.csv_dir);
    out << "wrote " << a.csv_dir << "/per_cluster.csv, " << a.csv_dir << "/per_event.csv, "
        << a.csv_dir << "/total.csv\n";
    return 0;
}

} // namespace

int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"hierarchical capsule regression over event-cluster panels"};
    app.name("hapnet");
    app.require_subcommand(1);

    GenDataArgs ga;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic panel with splits");
    gen->add_option("--events", ga.events, "number of event types (3, 6 or 9)")->required();
    gen->add_option("--subjects-per-cluster", ga.subjects_per_cluster,
                    "records per cluster (0 picks the scale default)");
    gen->add_option("--dim", ga.dim, "covariate dimension");
    gen->add_option("--seed", ga.seed, "generator seed");
    gen->add_option("--noise-std", ga.noise_std, "observation noise standard deviation");
    gen->add_flag("--linear-tau", ga.linear_tau, "identity response curves (diagnostic)");
    gen->add_option("--out", ga.out_path, "output dataset path (JSONL)")->required();

    TrainArgs ta;
    CLI::App* tr = app.add_subcommand("train", "train a model and write its checkpoint");
    tr->add_option("--data", ta.data_path, "dataset path")->required();
    tr->add_option("--config", ta.config_path, "key=value config file");
    CLI::Option* tr_ablation =
        tr->add_option("--ablation", ta.ablation, "full, no-paaa or no-recon");
    CLI::Option* tr_seed = tr->add_option("--seed", ta.seed, "overrides the config seed");
    tr->add_option("--out", ta.out_path, "checkpoint path")->required();

    EvalArgs ea;
    CLI::App* ev = app.add_subcommand("eval", "score a checkpoint on one split");
    ev->add_option("--data", ea.data_path, "dataset path")->required();
    ev->add_option("--ckpt", ea.ckpt_path, "checkpoint path")->required();
    ev->add_option("--split", ea.split, "train, valid or test");
    ev->add_option("--report", ea.report_path, "output report path (JSON)")->required();

    AblateArgs aa;
    CLI::App* ab = app.add_subcommand("ablate", "train all ablations across seeds");
    ab->add_option("--data", aa.data_path, "dataset path")->required();
    ab->add_option("--config", aa.config_path, "key=value config file");
    ab->add_option("--seeds", aa.seeds_text, "comma-separated seed list")->required();
    ab->add_option("--out", aa.out_dir, "output directory")->required();

    ReportArgs ra;
    CLI::App* rp = app.add_subcommand("report", "expand an eval report into CSV tables");
    rp->add_option("--eval", ra.eval_path, "eval report path (JSON)")->required();
    rp->add_option("--out-csv", ra.csv_dir, "output directory for CSV tables")->required();

    try {
        std::reverse(args.begin(), args.end()); // CLI11's vector form pops from the back
        app.parse(std::move(args));
        if (app.got_subcommand(gen)) return run_gen_data(ga, out);
        if (app.got_subcommand(tr))
            return run_train(ta, tr_seed->count() > 0, tr_ablation->count() > 0, out);
        if (app.got_subcommand(ev)) return run_eval(ea, out);
        if (app.got_subcommand(ab)) return run_ablate(aa, out);
        return run_report(ra, out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const LookupError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace hapnet
