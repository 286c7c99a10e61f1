// Acceptance gate: one check per release criterion, one PASS/FAIL line each.
// Exits 0 only if every criterion holds.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cli_harness.hpp"
#include "kgbias/bias_probe.hpp"
#include "kgbias/model.hpp"
#include "kgbias/report.hpp"
#include "kgbias/rng.hpp"
#include "kgbias/trainer.hpp"
#include "kgbias/triple_store.hpp"

using namespace kgbias;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [pass, detail] = body();
        report(name, pass, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-14});
}

// For gradient checks: components can legitimately sit at ~1e-10 where the
// finite difference is pure rounding noise, so floor the denominator well
// above that but far below any meaningful gradient magnitude.
double grad_rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-8});
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

// Two attribute groups of humans with one attribute fact and one profession
// fact each, professions round-robin so all labels occur.
TripleStore grouped_store(std::size_t humans_per_group, std::size_t professions) {
    TripleStore store;
    for (std::size_t g = 0; g < 2; ++g) {
        const std::string attr = g == 0 ? "attr_a" : "attr_b";
        for (std::size_t i = 0; i < humans_per_group; ++i) {
            const std::string person = "h_" + attr + "_" + std::to_string(i);
            store.add(person, "sens", attr);
            store.add(person, "works",
                      "prof" + std::to_string((g * humans_per_group + i) % professions));
        }
    }
    return store;
}

BiasProbeSpec grouped_spec(const TripleStore& store) {
    BiasProbeSpec spec;
    spec.sensitive_relation = store.relations().require("sens");
    spec.attribute_a = store.entities().require("attr_a");
    spec.attribute_b = {store.entities().require("attr_b")};
    spec.target_relation = store.relations().require("works");
    spec.humans = select_humans(store, HumanRule::has_sensitive_fact(spec.sensitive_relation));
    return spec;
}

// ---------------------------------------------------------------- criterion 1

std::pair<bool, std::string> gradient_correctness() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(1001);
    double max_rel = 0.0;

    for (const ModelKind kind : {ModelKind::TransEDot, ModelKind::ComplEx}) {
        for (int trial = 0; trial < 100; ++trial) {
            const std::uint32_t dim = 2 + static_cast<std::uint32_t>(uniform_index(rng, 8));
            EmbeddingModel model =
                EmbeddingModel::init_random(kind, dim, 6, 3, mix_seed(8899, trial));
            const EntityId h = static_cast<EntityId>(uniform_index(rng, 6));
            EntityId t = static_cast<EntityId>(uniform_index(rng, 6));
            while (t == h) t = static_cast<EntityId>(uniform_index(rng, 6));
            const RelationId r = static_cast<RelationId>(uniform_index(rng, 3));

            // score gradients against central differences, all slots
            for (const Wrt wrt : {Wrt::Head, Wrt::Relation, Wrt::Tail}) {
                const auto grad = model.score_gradient(h, r, t, wrt);
                auto row = wrt == Wrt::Relation ? model.relation_row(r)
                           : wrt == Wrt::Head   ? model.entity_row(h)
                                                : model.entity_row(t);
                for (std::size_t slot = 0; slot < row.size(); ++slot) {
                    const double saved = row[slot];
                    const double step = 1e-5;
                    row[slot] = saved + step;
                    const double up = model.score(h, r, t);
                    row[slot] = saved - step;
                    const double down = model.score(h, r, t);
                    row[slot] = saved;
                    max_rel =
                        std::max(max_rel, grad_rel_err(grad[slot], (up - down) / (2 * step)));
                }
            }

            // loss gradients (softmax CE over 1 positive + 6 corruptions)
            const Triple positive{h, r, t};
            std::vector<Triple> negatives;
            for (int n = 0; n < 6; ++n) {
                Triple neg = positive;
                EntityId other = static_cast<EntityId>(uniform_index(rng, 6));
                if (uniform_index(rng, 2) == 0) {
                    while (other == neg.head) other = static_cast<EntityId>(uniform_index(rng, 6));
                    neg.head = other;
                } else {
                    while (other == neg.tail) other = static_cast<EntityId>(uniform_index(rng, 6));
                    neg.tail = other;
                }
                negatives.push_back(neg);
            }
            StepWorkspace ws;
            ws.rows.reset(model.width());
            positive_loss_gradients(model, positive, negatives, ws);
            for (std::size_t i = 0; i < ws.rows.touched(); ++i) {
                const std::uint64_t key = ws.rows.key_at(i);
                auto row = RowGradAccumulator::is_relation_key(key)
                               ? model.relation_row(RowGradAccumulator::row_of(key))
                               : model.entity_row(RowGradAccumulator::row_of(key));
                const auto analytic = ws.rows.grad_at(i);
                for (std::size_t slot = 0; slot < row.size(); ++slot) {
                    const double saved = row[slot];
                    const double step = 1e-6;
                    StepWorkspace fd_ws;
                    fd_ws.rows.reset(model.width());
                    row[slot] = saved + step;
                    const double up = positive_loss_gradients(model, positive, negatives, fd_ws);
                    fd_ws.rows.reset(model.width());
                    row[slot] = saved - step;
                    const double down =
                        positive_loss_gradients(model, positive, negatives, fd_ws);
                    row[slot] = saved;
                    max_rel = std::max(
                        max_rel, grad_rel_err(analytic[slot], (up - down) / (2 * step)));
                }
            }
        }
    }

    const double elapsed = seconds_since(start);
    const bool pass = max_rel < 1e-4 && elapsed < 10.0;
    return {pass, fmt("100 cases/model kind, score+loss grads vs central differences; "
                      "max rel err %.2e (< 1e-4), %.2fs (< 10s)",
                      max_rel, elapsed)};
}

// ---------------------------------------------------------------- criterion 2

std::pair<bool, std::string> closed_form_probe() {
    const auto start = std::chrono::steady_clock::now();
    // 22 humans + 2 attributes + 26 professions = 50 entities
    const TripleStore store = grouped_store(11, 26);
    EmbeddingModel model = EmbeddingModel::init_random(
        ModelKind::TransEDot, 16, store.entities().size(), store.relations().size(), 4242);
    const BiasProbeSpec spec = grouped_spec(store);

    const auto a_row = model.entity_row(spec.attribute_a);
    const auto b_row = model.entity_row(spec.attribute_b[0]);
    const auto rows = bias_scores(model, store, spec);

    double max_rel = 0.0;
    double max_var = 0.0;
    for (const auto& row : rows) {
        const auto p_row = model.entity_row(row.target);
        double closed = 0.0;
        for (std::size_t i = 0; i < p_row.size(); ++i) {
            closed += spec.alpha * (a_row[i] - b_row[i]) * p_row[i];
        }
        max_rel = std::max(max_rel, rel_err(row.bias, closed));

        std::vector<double> deltas;
        for (const EntityId j : spec.humans) {
            deltas.push_back(probe_delta(model, spec, j, row.target));
        }
        const double mean =
            std::accumulate(deltas.begin(), deltas.end(), 0.0) / deltas.size();
        double var = 0.0;
        for (const double d : deltas) var += (d - mean) * (d - mean);
        var /= deltas.size();
        max_var = std::max(max_var, var);
    }

    const double elapsed = seconds_since(start);
    const bool pass = max_rel < 1e-10 && max_var <= 1e-12 && elapsed < 5.0;
    return {pass, fmt("26 professions on a 50-entity model; max rel err vs "
                      "alpha*(e_a-e_b).e_p %.2e (< 1e-10), max per-human variance %.2e "
                      "(<= 1e-12), %.2fs (< 5s)",
                      max_rel, max_var, elapsed)};
}

// ---------------------------------------------------------------- criterion 3

std::pair<bool, std::string> antisymmetry() {
    const TripleStore store = grouped_store(6, 5);
    double max_rel = 0.0;
    for (const ModelKind kind : {ModelKind::TransEDot, ModelKind::ComplEx}) {
        EmbeddingModel model = EmbeddingModel::init_random(
            kind, 8, store.entities().size(), store.relations().size(), 97531);
        BiasProbeSpec spec = grouped_spec(store);
        BiasProbeSpec swapped = spec;
        std::swap(swapped.attribute_a, swapped.attribute_b[0]);

        const auto rows = bias_scores(model, store, spec);
        const auto neg_rows = bias_scores(model, store, swapped);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            max_rel = std::max(max_rel, rel_err(rows[i].bias, -neg_rows[i].bias));
        }
    }
    return {max_rel < 1e-12,
            fmt("swapping attributes negates b_p for both model kinds (|B| = 1); "
                "max rel err %.2e (< 1e-12)",
                max_rel)};
}

// ---------------------------------------------------------------- criterion 4

std::pair<bool, std::string> alpha_ranking_invariance() {
    const TripleStore store = grouped_store(8, 7);
    bool all_equal = true;
    for (const ModelKind kind : {ModelKind::TransEDot, ModelKind::ComplEx}) {
        EmbeddingModel model = EmbeddingModel::init_random(
            kind, 8, store.entities().size(), store.relations().size(), 13579);
        BiasProbeSpec spec = grouped_spec(store);

        auto ranking = [&](double alpha) {
            spec.alpha = alpha;
            const auto rows = bias_scores(model, store, spec);
            std::vector<std::size_t> order(rows.size());
            std::iota(order.begin(), order.end(), 0u);
            std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                return rows[x].bias > rows[y].bias;
            });
            return order;
        };
        const auto mid = ranking(1e-2);
        all_equal = all_equal && ranking(1e-4) == mid && ranking(1.0) == mid;
    }
    return {all_equal, "argsort of b_p identical for alpha in {1e-4, 1e-2, 1.0}, both models"};
}

// ------------------------------------------------------- criteria 5 through 8

struct PipelineOutcome {
    bool ran = false;
    bool recovered = false;
    std::vector<double> losses;     // per epoch, from train stdout
    std::string store_bytes;        // seed-1 artifacts for determinism/purity
    std::string checkpoint_bytes;
    std::string csv_bytes;
    std::string md_bytes;
    bool checkpoint_untouched = false;
    std::string note;
};

std::string synth_spec_text(std::uint64_t seed) {
    // 20 professions; 0.30 of the mass on three designated ones per group
    // (group a: prof00-prof02, group b: prof03-prof05), rest uniform.
    const double planted = 0.30 / 3.0;
    const double rest = 0.70 / 17.0;
    std::string spec = "humans_per_group = 2000\n"
                       "sensitive_relation = group\n"
                       "target_relation = works_as\n"
                       "seed = " +
                       std::to_string(seed) + "\n";
    for (int g = 0; g < 2; ++g) {
        spec += g == 0 ? "group = ga" : "group = gb";
        for (int p = 0; p < 20; ++p) {
            const bool designated = g == 0 ? p < 3 : (p >= 3 && p < 6);
            spec += fmt(" prof%02d:%.17g", p, designated ? planted : rest);
        }
        spec += "\n";
    }
    return spec;
}

PipelineOutcome run_pipeline(const TempDir& dir, const std::string& tag, std::uint64_t seed) {
    PipelineOutcome outcome;
    const auto path = [&](const std::string& name) { return dir.file(tag + "_" + name); };

    spit(path("synth.cfg"), synth_spec_text(seed));
    spit(path("train.cfg"), "model = transe_dot\n"
                            "dim = 32\n"
                            "negatives = 200\n"
                            "epochs = 30\n"
                            "learning_rate = 0.1\n"
                            "optimizer = adagrad\n"
                            "seed = " +
                                std::to_string(seed) + "\n");
    spit(path("probe.cfg"), "sensitive_relation = group\n"
                            "attribute_a = ga\n"
                            "attribute_b = gb\n"
                            "target_relation = works_as\n"
                            "alpha = 0.01\n");

    if (run_cli(dir, "synth --spec " + path("synth.cfg") + " --out " + path("s.store")).code !=
        0) {
        outcome.note = "synth failed";
        return outcome;
    }
    const CliResult train = run_cli(dir, "train --store " + path("s.store") + " --config " +
                                             path("train.cfg") + " --out " + path("m.kgem"));
    if (train.code != 0) {
        outcome.note = "train failed";
        return outcome;
    }
    {
        std::istringstream in(train.out);
        std::string line;
        while (std::getline(in, line)) {
            unsigned epoch = 0;
            double loss = 0.0;
            if (std::sscanf(line.c_str(), "epoch %u loss %lf", &epoch, &loss) == 2) {
                outcome.losses.push_back(loss);
            }
        }
    }

    const std::string checkpoint_before = slurp(path("m.kgem"));
    if (run_cli(dir, "audit --store " + path("s.store") + " --model " + path("m.kgem") +
                         " --probe " + path("probe.cfg") + " --out " + path("b.csv") +
                         " --markdown " + path("b.md") + " --min-count 20 --top-k 20")
            .code != 0) {
        outcome.note = "audit failed";
        return outcome;
    }
    outcome.checkpoint_untouched = slurp(path("m.kgem")) == checkpoint_before;
    outcome.store_bytes = slurp(path("s.store"));
    outcome.checkpoint_bytes = checkpoint_before;
    outcome.csv_bytes = slurp(path("b.csv"));
    outcome.md_bytes = slurp(path("b.md"));

    // ranked labels straight from the CSV
    std::vector<std::string> ranked;
    {
        std::istringstream in(outcome.csv_bytes);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) ranked.push_back(line.substr(0, line.find(',')));
    }
    const auto in_set = [](const std::string& label, std::initializer_list<const char*> set) {
        return std::any_of(set.begin(), set.end(),
                           [&](const char* s) { return label == s; });
    };
    bool ok = ranked.size() == 20;
    for (int i = 0; i < 3 && ok; ++i) {
        ok = in_set(ranked[i], {"prof00", "prof01", "prof02"}) &&
             in_set(ranked[ranked.size() - 1 - i], {"prof03", "prof04", "prof05"});
    }
    outcome.ran = true;
    outcome.recovered = ok;
    return outcome;
}

void planted_bias_suite() {
    const auto start = std::chrono::steady_clock::now();
    TempDir dir;
    std::vector<PipelineOutcome> runs;
    std::string per_seed;
    int recovered = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        runs.push_back(run_pipeline(dir, "run" + std::to_string(seed), seed));
        const PipelineOutcome& r = runs.back();
        if (r.recovered) ++recovered;
        per_seed += fmt(" seed%llu:%s", static_cast<unsigned long long>(seed),
                        !r.ran ? r.note.c_str() : (r.recovered ? "ok" : "miss"));
    }
    const double elapsed = seconds_since(start);

    report("planted-bias recovery", recovered >= 4 && elapsed < 300.0,
           fmt("2x2000 humans, 20 professions, planted top/bottom 3 recovered in %d/5 seeds "
               "(need >= 4);%s; %.1fs (< 300s)",
               recovered, per_seed.c_str(), elapsed));

    const PipelineOutcome& first = runs.front();

    // criterion 6: epoch-30 vs epoch-1 loss on the same synthetic store. The
    // recovery config (200 negatives) cannot halve its loss here: corruptions
    // that hit true triples are kept, and with half the graph sharing each
    // group attribute that floors the loss near (ln 7 + ln 51) / 2 ~ 2.9,
    // above half of the ln(201) starting point. With 10 negatives the floor
    // scales down linearly while the start only shrinks logarithmically, so
    // halving is actually reachable -- and demanded.
    spit(dir.file("sanity_train.cfg"), "model = transe_dot\n"
                                       "dim = 32\n"
                                       "negatives = 10\n"
                                       "epochs = 30\n"
                                       "learning_rate = 0.1\n"
                                       "optimizer = adagrad\n"
                                       "seed = 1\n");
    const CliResult sanity =
        run_cli(dir, "train --store " + dir.file("run1_s.store") + " --config " +
                         dir.file("sanity_train.cfg") + " --out " + dir.file("sanity.kgem"));
    std::vector<double> sanity_losses;
    {
        std::istringstream in(sanity.out);
        std::string line;
        while (std::getline(in, line)) {
            unsigned epoch = 0;
            double loss = 0.0;
            if (std::sscanf(line.c_str(), "epoch %u loss %lf", &epoch, &loss) == 2) {
                sanity_losses.push_back(loss);
            }
        }
    }
    if (sanity.code == 0 && sanity_losses.size() == 30) {
        const double e1 = sanity_losses.front();
        const double e30 = sanity_losses.back();
        report("training sanity", e30 < 0.5 * e1,
               fmt("seed-1 store, dim 32, 10 negatives, adagrad 0.1: epoch-30 mean loss "
                   "%.4f < 0.5 x epoch-1 mean loss %.4f",
                   e30, e1));
    } else {
        report("training sanity", false,
               fmt("sanity train run failed (exit %d, %zu loss lines)", sanity.code,
                   sanity_losses.size()));
    }

    // criterion 7: audit must not modify the checkpoint file
    report("probe purity", first.ran && first.checkpoint_untouched,
           first.ran ? "checkpoint bytes identical before and after audit"
                     : "pipeline did not complete");

    // criterion 8: repeat seed 1 and compare artifacts bit for bit
    const PipelineOutcome repeat = run_pipeline(dir, "run1b", 1);
    const bool identical = repeat.ran && repeat.store_bytes == first.store_bytes &&
                           repeat.checkpoint_bytes == first.checkpoint_bytes &&
                           repeat.csv_bytes == first.csv_bytes &&
                           repeat.md_bytes == first.md_bytes;
    report("determinism", identical,
           "store, checkpoint, csv and markdown bit-identical across a repeated "
           "single-threaded run");
}

// ---------------------------------------------------------------- criterion 9

std::pair<bool, std::string> count_oracle() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(600613);
    std::size_t checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t entities = 20 + uniform_index(rng, 180);
        const std::size_t relations = 2 + uniform_index(rng, 4);
        const std::size_t triples = 1 + uniform_index(rng, 10000);
        TripleStore store;
        for (std::size_t i = 0; i < triples; ++i) {
            store.add("e" + std::to_string(uniform_index(rng, entities)),
                      "r" + std::to_string(uniform_index(rng, relations)),
                      "e" + std::to_string(uniform_index(rng, entities)));
        }
        const RelationId sens = 0;
        const RelationId target = 1;
        const auto humans = select_humans(store, HumanRule::has_sensitive_fact(sens));
        if (humans.empty()) continue;
        const EntityId attribute =
            static_cast<EntityId>(uniform_index(rng, store.entities().size()));

        // brute force: double loop over humans x raw triples, no index
        std::unordered_map<EntityId, std::int64_t> expect;
        for (const EntityId j : humans) {
            bool has_attr = false;
            for (const Triple& t : store.triples()) {
                if (t.head == j && t.relation == sens && t.tail == attribute) has_attr = true;
            }
            if (!has_attr) continue;
            for (const Triple& t : store.triples()) {
                if (t.head == j && t.relation == target) ++expect[t.tail];
            }
        }

        const CountTable table = count_by_attribute(store, humans, sens, attribute, target);
        for (const EntityId t : store.target_tails(target)) {
            const auto it = expect.find(t);
            const std::int64_t want = it == expect.end() ? 0 : it->second;
            if (table.at(attribute, t) != want) {
                return {false, fmt("store %d: mismatch at target %u (%lld vs %lld)", trial, t,
                                   static_cast<long long>(table.at(attribute, t)),
                                   static_cast<long long>(want))};
            }
            ++checked;
        }
        if (table.at(attribute, 4000000001u) != 0) {
            return {false, fmt("store %d: absent target not zero", trial)};
        }
    }
    return {true, fmt("50 random stores (<= 10^4 triples), %zu (attribute, target) cells "
                      "match the raw-triple double loop; %.2fs",
                      checked, seconds_since(start))};
}

// --------------------------------------------------------------- criterion 10

std::pair<bool, std::string> report_fidelity() {
    BiasScoreRow fixture;
    fixture.label = "baritone";
    fixture.bias = 0.132;
    fixture.count_a = 44;
    fixture.count_b = 0;
    const BiasReport one = build_report("", {fixture});
    const std::string expected = "| target | b_p | count_a | count_b |\n"
                                 "| --- | --- | --- | --- |\n"
                                 "| baritone | 0.132 | 44 | 0 |\n";
    const bool pass = render_report(one, ReportFormat::Markdown) == expected;
    return {pass, pass ? "markdown for the fixture row is byte-identical to the documented "
                         "layout (| baritone | 0.132 | 44 | 0 |)"
                       : "rendered markdown deviates from the documented layout"};
}

} // namespace

int main() {
    std::printf("acceptance gate: %s\n", KGBIAS_CLI);

    run("gradient correctness", gradient_correctness);
    run("closed-form probe", closed_form_probe);
    run("antisymmetry", antisymmetry);
    run("alpha-ranking invariance", alpha_ranking_invariance);
    try {
        planted_bias_suite(); // criteria 5-8 share one set of pipeline runs
    } catch (const std::exception& e) {
        report("planted-bias suite", false, std::string("exception: ") + e.what());
    }
    run("count oracle", count_oracle);
    run("report fidelity", report_fidelity);

    if (failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", failures);
    return 1;
}
