// End-to-end acceptance checks, one per release gate. Each check prints a
// single [PASS]/[FAIL] line with its measured numbers so a red line carries
// enough context to debug. The binary exits nonzero if any check fails.
//
// These are deliberately heavier than the unit suites: the ordering check
// trains the full ablation grid on two synthetic cohorts and takes several
// minutes; everything else finishes in seconds.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hapnet/baselines.hpp"
#include "hapnet/capsules.hpp"
#include "hapnet/cli.hpp"
#include "hapnet/datagen.hpp"
#include "hapnet/eval.hpp"
#include "hapnet/gradcheck.hpp"
#include "hapnet/model.hpp"
#include "hapnet/rng.hpp"
#include "hapnet/train.hpp"

using namespace hapnet;
namespace fs = std::filesystem;

namespace {

struct CheckResult {
    bool ok = false;
    std::string detail;
};

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    va_list ap;
    va_start(ap, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

Vec random_vec(Rng& r, int n, double lo = -2.0, double hi = 2.0) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = r.uniform(lo, hi);
    return v;
}

// --- 1: analytic gradients of the whole pipeline vs central differences ---

CheckResult check_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg;
    cfg.d = 6;
    cfg.n_e = 3;
    cfg.n_u = cfg.n_s = cfg.n_v = cfg.n_z = 2;
    cfg.h = 3;
    cfg.head_hidden = 4;
    cfg.decoder_hidden = 4;
    cfg.seed = 26;
    Model m(cfg, AblationMode::full);

    Rng r(12);
    const Vec xa = random_vec(r, cfg.d);
    const Vec xb = random_vec(r, cfg.d);
    const Vec xc = random_vec(r, cfg.d);

    // one singleton, one pair, one full-house record: together they exercise
    // every event bank, the no-attention singleton path, and attention proper
    DifferentiableProgram prog;
    prog.params = &m.params();
    prog.forward = [&](Tape& t) {
        Var l = m.record_loss_t(t, xa.span(), EventCluster({2}), 4.5);
        l = t.add(l, m.record_loss_t(t, xb.span(), EventCluster({1, 3}), 9.25));
        return t.add(l, m.record_loss_t(t, xc.span(), EventCluster({1, 2, 3}), 14.0));
    };
    const GradCheckReport rep = gradient_check(prog, 1e-5, /*stride=*/1, /*denom_floor=*/1e-3);

    const double secs = elapsed_s(t0);
    const bool ok = rep.ok(1e-4) && secs < 30.0;
    return {ok, fmt("max_rel_err=%.3g (tol 1e-4, worst %s[%d]) params_checked=%d t=%.1fs (budget 30s)",
                    rep.max_rel_err, rep.worst_param.c_str(), rep.worst_index, rep.checked, secs)};
}

// --- 2: coupling rows are distributions, squashed norms stay inside the unit ball ---

CheckResult check_routing_invariants() {
    Rng root(77);
    double worst_row_gap = 0.0;
    double worst_norm = 0.0;
    const int instances = 1000;
    for (int k = 0; k < instances; ++k) {
        Rng r = root.derive(1, k, 0);
        const int n_in = 2 + static_cast<int>(r.bounded(5));
        const int n_out = 2 + static_cast<int>(r.bounded(4));
        const int h = 2 + static_cast<int>(r.bounded(5));
        const int iters = 1 + static_cast<int>(r.bounded(4));

        ParamStore ps;
        const RoutingParams params = make_outcome_params(ps, n_in, n_out, h);
        for (double& v : ps.raw()) v = r.uniform(-1.0, 1.0);

        std::vector<Vec> caps;
        for (int i = 0; i < n_in; ++i) caps.push_back(random_vec(r, h));
        const PoseMatrix in = make_pose(CapsuleLevel::cluster, std::move(caps));

        const auto [out, state] = dynamic_routing(ps, in, params, iters, CapsuleLevel::outcome);
        for (int i = 0; i < n_in; ++i) {
            double s = 0.0;
            for (int j = 0; j < n_out; ++j) s += state.couplings.at(i, j);
            worst_row_gap = std::max(worst_row_gap, std::fabs(s - 1.0));
        }
        for (const Vec& v : out.capsules) worst_norm = std::max(worst_norm, v.norm());
    }
    const bool ok = worst_row_gap < 1e-9 && worst_norm < 1.0;
    return {ok, fmt("instances=%d worst_row_sum_gap=%.3g (tol 1e-9) max_capsule_norm=%.12f (< 1)",
                    instances, worst_row_gap, worst_norm)};
}

// --- 3: records touch only the event networks named in their cluster ---

CheckResult check_event_isolation() {
    ModelConfig cfg;
    cfg.d = 6;
    cfg.n_e = 6;
    cfg.n_u = cfg.n_s = cfg.n_v = cfg.n_z = 2;
    cfg.h = 3;
    cfg.head_hidden = 4;
    cfg.decoder_hidden = 4;
    cfg.seed = 5;
    Model m(cfg, AblationMode::full);
    const EventCluster cluster({1, 3});

    auto bank_mass = [&](const std::vector<double>& g, int e) {
        double s = 0.0;
        for (const auto& row : m.layout().events[static_cast<size_t>(e - 1)].W)
            for (const ParamRef& ref : row)
                for (int64_t k = 0; k < ref.size(); ++k) s += std::fabs(g[static_cast<size_t>(ref.off + k)]);
        return s;
    };

    Rng r(40);
    int clean = 0;
    const int subjects = 100;
    double stray = 0.0;
    for (int k = 0; k < subjects; ++k) {
        const Vec x = random_vec(r, cfg.d);
        std::vector<double> g(static_cast<size_t>(m.params().size()), 0.0);
        Tape t(&m.params(), g.data());
        t.backward(m.record_loss_t(t, x.span(), cluster, r.uniform(2.0, 12.0)));
        double off_mass = 0.0;
        for (int e : {2, 4, 5, 6}) off_mass += bank_mass(g, e);
        const bool active_ok = bank_mass(g, 1) > 0.0 && bank_mass(g, 3) > 0.0;
        if (off_mass == 0.0 && active_ok) ++clean;
        stray = std::max(stray, off_mass);
    }
    return {clean == subjects,
            fmt("subjects=%d with cluster {1,3}: uninvolved banks {2,4,5,6} exactly zero in %d "
                "(max stray mass %.3g), banks {1,3} nonzero in all",
                subjects, clean, stray)};
}

// --- 4: generator outcomes match an independent evaluation of the recipe ---

CheckResult check_generator_oracle() {
    SyntheticConfig cfg;
    cfg.n_e = 3;
    cfg.d = 25;
    cfg.subjects_per_cluster = 100;
    cfg.seed = 314;
    cfg.noise_std = 0.0;
    const Dataset ds = generate(cfg);
    const SyntheticDraws draws = synthetic_draws(cfg);

    // effect curves rewritten here from scratch; position within the event
    // triple picks the curve, co-present modifier events shift coefficients
    auto tau_of = [](int pos, double t) {
        if (pos == 0) return 5.0 + 2.0 * std::sin(t);
        if (pos == 1) return 5.0 + 2.0 * std::cos(t);
        return 5.0 + std::sin(t) + std::cos(t);
    };

    double worst = 0.0;
    int mismatches = 0;
    for (const SubjectRecord& rec : ds.records) {
        double want = 0.0;
        for (int e : rec.cluster.ids()) {
            const Vec& coef = draws.coef[static_cast<size_t>(e - 1)];
            const int src = modifier_source(e);
            const bool modified = src != 0 && rec.cluster.contains(src);
            double t = 0.0;
            for (int i = 0; i < cfg.d; ++i) {
                double ci = coef[i];
                if (modified) ci += draws.modifier.at(e)[i];
                t += ci * rec.x[i];
            }
            want += tau_of((e - 1) % 3, t);
        }
        const double diff = std::fabs(rec.y - want);
        worst = std::max(worst, diff);
        if (diff > 1e-10 * std::max(1.0, std::fabs(want))) ++mismatches;
    }

    std::set<std::string> labels;
    for (const SubjectRecord& rec : ds.records) labels.insert(rec.cluster.label());

    const bool ok = mismatches == 0 && ds.records.size() == 700 && labels.size() == 7;
    return {ok, fmt("records=%zu clusters=%zu (want 7) mismatches=%d worst_abs_diff=%.3g (tol 1e-10)",
                    ds.records.size(), labels.size(), mismatches, worst)};
}

// --- 5: ablation ordering on the 3-event cohort, attention gap on the 6-event cohort ---

CheckResult check_ordering() {
    const auto t0 = std::chrono::steady_clock::now();

    // Cohort dimension note: the trigonometric effect curves act on coef.x
    // whose spread grows with sqrt(d/3). At the library default d=25 the
    // curves oscillate too fast for ANY of the desk-scale models (including
    // the MLP baseline) to pick up out-of-sample, so every net collapses to
    // the per-cluster-mean plateau and differences between variants are
    // noise. d=10 keeps the curves learnable and the architecture
    // comparison meaningful, which is what this gate is about.
    SyntheticConfig e3;
    e3.n_e = 3;
    e3.d = 10;
    e3.subjects_per_cluster = 1000;
    e3.seed = 101;
    Dataset data3 = generate(e3, ExecMode::parallel);
    assign_splits(data3, e3.seed);

    SyntheticConfig e6;
    e6.n_e = 6;
    e6.d = 10;
    e6.subjects_per_cluster = 200;
    e6.seed = 202;
    Dataset data6 = generate(e6, ExecMode::parallel);
    assign_splits(data6, e6.seed);

    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.epochs = 300;
    tc.batch_size = 16;
    tc.optimizer = "adam";
    tc.patience = 30;

    const std::vector<uint64_t> seeds = {1, 2, 3};
    auto mean_test_mape = [&](const Dataset& data, AblationMode mode) {
        double sum = 0.0;
        for (uint64_t s : seeds) {
            ModelConfig mc;
            mc.d = data.meta.d;
            mc.n_e = data.meta.n_e;
            mc.seed = s;
            TrainConfig t = tc;
            t.seed = s;
            t.ablation = mode;
            const TrainRun run = train(data, mc, t, ExecMode::parallel);
            sum += evaluate(run.model, data, Split::test, ExecMode::parallel).mape_mean;
        }
        return sum / static_cast<double>(seeds.size());
    };

    const double full3 = mean_test_mape(data3, AblationMode::full);
    const double norec3 = mean_test_mape(data3, AblationMode::no_recon);
    const double nopaaa3 = mean_test_mape(data3, AblationMode::no_paaa);

    BaselineConfig bc;
    const double linear3 = run_baselines(data3, bc, ExecMode::parallel).linear.mape_mean;

    const double full6 = mean_test_mape(data6, AblationMode::full);
    const double nopaaa6 = mean_test_mape(data6, AblationMode::no_paaa);
    const double gap6 = nopaaa6 - full6;

    const double secs = elapsed_s(t0);
    const bool order_ok = full3 < norec3 && norec3 < nopaaa3 && nopaaa3 < linear3;
    const bool ok = order_ok && gap6 >= 1.0 && secs < 1800.0;
    return {ok, fmt("e3 means over seeds {1,2,3}: full=%.3f < no_recon=%.3f < no_paaa=%.3f < linear=%.3f %s; "
                    "e6 attention gap=%.3f (need >= 1.0); t=%.0fs (budget 1800s)",
                    full3, norec3, nopaaa3, linear3, order_ok ? "holds" : "VIOLATED", gap6, secs)};
}

// --- 6: the reported error metric equals a from-scratch recomputation ---

CheckResult check_mape_oracle() {
    // hand case first: one record, 10% off
    const auto [hand, hand_se] = mape({100.0}, {90.0});
    (void)hand_se;
    if (std::fabs(hand - 10.0) > 1e-12) return {false, fmt("hand case y=100 yhat=90 gave %.15f", hand)};

    SyntheticConfig cfg;
    cfg.n_e = 3;
    cfg.d = 6;
    cfg.subjects_per_cluster = 40;
    cfg.seed = 11;
    Dataset ds = generate(cfg);
    assign_splits(ds, 11);

    ModelConfig mc;
    mc.d = cfg.d;
    mc.n_e = cfg.n_e;
    mc.n_u = mc.n_s = mc.n_v = mc.n_z = 2;
    mc.h = 3;
    mc.head_hidden = 4;
    mc.decoder_hidden = 4;
    mc.seed = 3;
    const Model m(mc, AblationMode::full);

    const EvalReport rep = evaluate(m, ds, Split::test);
    double ape = 0.0;
    int n = 0;
    for (const SubjectRecord& rec : ds.records) {
        if (rec.split != Split::test) continue;
        ape += std::fabs((rec.y - m.predict(rec.x, rec.cluster).yhat) / rec.y);
        ++n;
    }
    const double brute = 100.0 * ape / static_cast<double>(n);
    const double gap = std::fabs(rep.mape_mean - brute);
    const bool ok = n == rep.count && gap <= 1e-12 * std::max(1.0, std::fabs(brute));
    return {ok, fmt("report=%.12f brute=%.12f |diff|=%.3g (rel tol 1e-12, n=%d); hand case exact", rep.mape_mean,
                    brute, gap, n)};
}

// --- 7: bytes on disk are a pure function of the seeds ---

CheckResult check_determinism() {
    const fs::path dir = "tmp_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto path = [&](const std::string& leaf) { return (dir / leaf).string(); };
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    auto quiet_cli = [](std::vector<std::string> args) {
        std::ostringstream out, err;
        return cli_main(std::move(args), out, err);
    };

    for (const std::string leaf : {"a.jsonl", "b.jsonl"}) {
        const int code = quiet_cli({"gen-data", "--events", "3", "--subjects-per-cluster", "40", "--dim", "6",
                                    "--seed", "99", "--out", path(leaf)});
        if (code != 0) return {false, "gen-data exited " + std::to_string(code)};
    }
    const bool data_same = slurp(path("a.jsonl")) == slurp(path("b.jsonl"));

    std::ofstream(path("train.cfg")) << "n_u = 2\nn_s = 2\nn_v = 2\nn_z = 2\nh = 3\n"
                                     << "head_hidden = 4\ndecoder_hidden = 4\n"
                                     << "epochs = 3\nbatch_size = 8\nseed = 7\n";
    for (const std::string leaf : {"c1.json", "c2.json"}) {
        const int code = quiet_cli({"train", "--data", path("a.jsonl"), "--config", path("train.cfg"), "--out",
                                    path(leaf)});
        if (code != 0) return {false, "train exited " + std::to_string(code)};
    }
    const bool ckpt_same = slurp(path("c1.json")) == slurp(path("c2.json"));

    fs::remove_all(dir);
    return {data_same && ckpt_same, fmt("dataset reruns byte-identical: %s; checkpoint reruns byte-identical: %s",
                                        data_same ? "yes" : "NO", ckpt_same ? "yes" : "NO")};
}

// --- 8: report totals are exact sums of their per-cluster groups ---

CheckResult check_aggregation_identities() {
    SyntheticConfig cfg;
    cfg.n_e = 3;
    cfg.d = 6;
    cfg.subjects_per_cluster = 37; // odd size so split rounding is exercised
    cfg.seed = 23;
    Dataset ds = generate(cfg);
    assign_splits(ds, 23);

    Rng r(8);
    int reports = 0;
    for (Split sp : {Split::train, Split::valid, Split::test}) {
        const std::vector<size_t> idx = split_indices(ds, sp);
        std::vector<double> yhat;
        yhat.reserve(idx.size());
        for (size_t i : idx) yhat.push_back(ds.records[i].y + r.uniform(-3.0, 3.0));
        const EvalReport rep = make_report(ds, sp, idx, yhat);

        int count_sum = 0;
        double sum_y = 0.0, sum_yhat = 0.0, ape_sum = 0.0;
        for (const auto& [label, g] : rep.per_cluster) {
            count_sum += g.count;
            sum_y += g.sum_y;
            sum_yhat += g.sum_yhat;
            ape_sum += g.ape_sum;
        }
        const bool exact = count_sum == rep.count && static_cast<size_t>(rep.count) == idx.size() &&
                           sum_y == rep.total.sum_y && sum_yhat == rep.total.sum_yhat &&
                           ape_sum == rep.total.ape_sum;
        if (!exact)
            return {false, fmt("split %s: totals drift from cluster sums (count %d vs %d)", to_string(sp).c_str(),
                               count_sum, rep.count)};
        ++reports;
    }
    return {true, fmt("%d reports: per-cluster counts sum to split sizes, total sums equal cluster sums with ==",
                      reports)};
}

// --- 9: predictions ignore the listing order of events in a cluster ---

CheckResult check_permutation_invariance() {
    ModelConfig cfg;
    cfg.d = 8;
    cfg.n_e = 6;
    cfg.seed = 15;
    const Model m(cfg, AblationMode::full);

    Rng r(92);
    double worst = 0.0;
    const int instances = 200;
    for (int k = 0; k < instances; ++k) {
        std::vector<int> ids = {1, 2, 3, 4, 5, 6};
        for (int i = 5; i > 0; --i) std::swap(ids[static_cast<size_t>(i)], ids[r.bounded(static_cast<uint64_t>(i + 1))]);
        const int size = 2 + static_cast<int>(r.bounded(5));
        ids.resize(static_cast<size_t>(size));

        std::vector<int> shuffled = ids;
        for (int i = size - 1; i > 0; --i)
            std::swap(shuffled[static_cast<size_t>(i)], shuffled[r.bounded(static_cast<uint64_t>(i + 1))]);

        const Vec x = random_vec(r, cfg.d);
        const double a = m.predict(x, EventCluster(ids)).yhat;
        const double b = m.predict(x, EventCluster(shuffled)).yhat;
        worst = std::max(worst, std::fabs(a - b));
    }
    return {worst <= 1e-12, fmt("instances=%d max |yhat delta| under event reordering = %.3g (tol 1e-12)",
                                instances, worst)};
}

} // namespace

int main() {
    struct Gate {
        const char* name;
        CheckResult (*run)();
    };
    const Gate gates[] = {
        {"gradient-check", check_gradients},
        {"routing-invariants", check_routing_invariants},
        {"event-isolation", check_event_isolation},
        {"generator-oracle", check_generator_oracle},
        {"ablation-ordering", check_ordering},
        {"mape-oracle", check_mape_oracle},
        {"determinism", check_determinism},
        {"aggregation-identities", check_aggregation_identities},
        {"permutation-invariance", check_permutation_invariance},
    };

    int passed = 0;
    int index = 0;
    for (const Gate& g : gates) {
        ++index;
        CheckResult res;
        try {
            res = g.run();
        } catch (const std::exception& e) {
            res = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %d %-24s %s\n", res.ok ? "PASS" : "FAIL", index, g.name, res.detail.c_str());
        std::fflush(stdout);
        if (res.ok) ++passed;
    }
    std::printf("acceptance: %d/9 passed\n", passed);
    return passed == 9 ? 0 : 1;
}
