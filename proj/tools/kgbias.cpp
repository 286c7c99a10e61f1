// kgbias: ingest triple files, train embeddings, and audit them for
// attribute bias. Exit codes: 0 success, 1 usage, 2 data/parse, 3 numeric.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgbias/bias_probe.hpp"
#include "kgbias/errors.hpp"
#include "kgbias/model.hpp"
#include "kgbias/report.hpp"
#include "kgbias/synthgen.hpp"
#include "kgbias/trainer.hpp"
#include "kgbias/triple_store.hpp"

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw kgbias::ParseError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw kgbias::ParseError("failed to write " + path);
}

struct IngestArgs {
    std::string triples;
    std::string out;
    std::string entity_vocab;
    std::string relation_vocab;
};

int run_ingest(const IngestArgs& args) {
    kgbias::LoadStats stats;
    const kgbias::TripleStore store =
        kgbias::load_triples(args.triples, kgbias::TripleFormat::Tsv, &stats);
    store.save(args.out);
    if (!args.entity_vocab.empty()) {
        std::ofstream out(args.entity_vocab, std::ios::binary);
        if (!out) throw kgbias::ParseError("cannot open " + args.entity_vocab + " for writing");
        store.entities().write_csv(out);
    }
    if (!args.relation_vocab.empty()) {
        std::ofstream out(args.relation_vocab, std::ios::binary);
        if (!out) {
            throw kgbias::ParseError("cannot open " + args.relation_vocab + " for writing");
        }
        store.relations().write_csv(out);
    }
    std::cout << "read " << stats.lines << " lines, stored " << stats.unique_triples
              << " unique triples (" << store.entities().size() << " entities, "
              << store.relations().size() << " relations)\n";
    return 0;
}

struct TrainArgs {
    std::string store;
    std::string config;
    std::string out;
};

int run_train(const TrainArgs& args) {
    const kgbias::TripleStore store = kgbias::TripleStore::load(args.store);
    const kgbias::TrainConfig config = kgbias::TrainConfig::from_file(args.config);
    const kgbias::TrainResult result = kgbias::train(store, config);
    for (const kgbias::LossRecord& record : result.losses) {
        std::cout << "epoch " << record.epoch << " loss " << record.mean_loss << '\n';
    }
    result.model.save(args.out);
    return 0;
}

struct AuditArgs {
    std::string store;
    std::string model;
    std::string probe;
    std::string out;
    std::string markdown;
    std::int64_t min_count = 20;
    std::int64_t top_k = 20;
    std::string pairwise;
};

int run_audit(const AuditArgs& args) {
    const kgbias::TripleStore store = kgbias::TripleStore::load(args.store);
    const kgbias::EmbeddingModel model = kgbias::EmbeddingModel::load(args.model);
    const kgbias::BiasProbeSpec spec = kgbias::load_probe_spec(args.probe, store);

    std::vector<kgbias::BiasScoreRow> rows;
    std::string title;
    if (args.pairwise.empty()) {
        rows = kgbias::bias_scores(model, store, spec);
        title = "bias audit: " + store.entities().label(spec.attribute_a) + " vs";
        for (const kgbias::EntityId b : spec.attribute_b) {
            title += " " + store.entities().label(b);
        }
    } else {
        const auto comma = args.pairwise.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 == args.pairwise.size()) {
            throw UsageError("--pairwise expects two entity labels as A,B");
        }
        const kgbias::EntityId person_a =
            store.entities().require(args.pairwise.substr(0, comma));
        const kgbias::EntityId person_b =
            store.entities().require(args.pairwise.substr(comma + 1));
        rows = kgbias::pairwise_bias(model, store, spec, person_a, person_b);
        title = "pairwise bias: " + args.pairwise.substr(0, comma) + " vs " +
                args.pairwise.substr(comma + 1);
    }

    const kgbias::BiasReport report =
        kgbias::build_report(std::move(title), std::move(rows), args.min_count, args.top_k);
    write_text_file(args.out, kgbias::render_report(report, kgbias::ReportFormat::Csv));
    if (!args.markdown.empty()) {
        write_text_file(args.markdown,
                        kgbias::render_report(report, kgbias::ReportFormat::Markdown));
    }
    return 0;
}

struct SynthArgs {
    std::string spec;
    std::string out;
    std::string tsv;
};

int run_synth(const SynthArgs& args) {
    const kgbias::SynthSpec spec = kgbias::SynthSpec::from_file(args.spec);
    const kgbias::TripleStore store = kgbias::generate(spec);
    store.save(args.out);
    if (!args.tsv.empty()) store.write_tsv(args.tsv);
    std::cout << "generated " << store.triples().size() << " triples ("
              << store.entities().size() << " entities)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph embedding trainer and bias-audit toolkit"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    CLI::App* ingest = app.add_subcommand("ingest", "build a binary store from a triple TSV");
    ingest->add_option("--triples", ingest_args.triples, "head<TAB>relation<TAB>tail file")
        ->required();
    ingest->add_option("--out", ingest_args.out, "output store path")->required();
    ingest->add_option("--entity-vocab", ingest_args.entity_vocab, "also write id,label CSV");
    ingest->add_option("--relation-vocab", ingest_args.relation_vocab,
                       "also write id,label CSV");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train embeddings on a store");
    train->add_option("--store", train_args.store, "binary store path")->required();
    train->add_option("--config", train_args.config, "key = value training config")
        ->required();
    train->add_option("--out", train_args.out, "output checkpoint path")->required();

    AuditArgs audit_args;
    CLI::App* audit = app.add_subcommand("audit", "rank target tails by induced bias");
    audit->add_option("--store", audit_args.store, "binary store path")->required();
    audit->add_option("--model", audit_args.model, "checkpoint path")->required();
    audit->add_option("--probe", audit_args.probe, "key = value probe spec")->required();
    audit->add_option("--out", audit_args.out, "output CSV path")->required();
    audit->add_option("--markdown", audit_args.markdown, "also write a markdown table");
    audit->add_option("--min-count", audit_args.min_count,
                      "drop rows with count_a + count_b below this");
    audit->add_option("--top-k", audit_args.top_k, "rows to render");
    audit->add_option("--pairwise", audit_args.pairwise,
                      "compare two entities A,B instead of the gradient probe");

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic store");
    synth->add_option("--spec", synth_args.spec, "key = value synth spec")->required();
    synth->add_option("--out", synth_args.out, "output store path")->required();
    synth->add_option("--tsv", synth_args.tsv, "also write the triples as TSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(ingest)) return run_ingest(ingest_args);
        if (app.got_subcommand(train)) return run_train(train_args);
        if (app.got_subcommand(audit)) return run_audit(audit_args);
        if (app.got_subcommand(synth)) return run_synth(synth_args);
        std::cerr << "error: no subcommand selected\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const kgbias::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        // ParseError, LookupError, I/O failures: data problems.
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
