#include "kgbias/bias_probe.hpp"

#include <algorithm>
#include <cmath>

#include "kgbias/errors.hpp"
#include "kgbias/kvfile.hpp"

namespace kgbias {

namespace {

// direction = grad_head g(e_j, r_s, e_a) - (1/|B|) sum_b grad_head g(e_j, r_s, e_b).
// With |B| == 1 the mean is a plain difference, which keeps swapping a and b
// an exact sign flip.
void probe_direction(const EmbeddingModel& model, const BiasProbeSpec& spec, EntityId person,
                     std::span<double> out, std::span<double> scratch) {
    // The probe moves the person row, so both terms are gradients of the
    // attribute scores wrt the head argument.
    model.score_gradient(person, spec.sensitive_relation, spec.attribute_a, Wrt::Head, out);

    std::vector<double> mean(out.size(), 0.0);
    for (const EntityId b : spec.attribute_b) {
        model.score_gradient(person, spec.sensitive_relation, b, Wrt::Head, scratch);
        for (std::size_t i = 0; i < out.size(); ++i) mean[i] += scratch[i];
    }
    const double inv = 1.0 / static_cast<double>(spec.attribute_b.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= inv * mean[i];
}

std::vector<BiasScoreRow> make_rows(const TripleStore& store, const BiasProbeSpec& spec,
                                    const std::vector<EntityId>& targets) {
    const CountTable counts_a = count_by_attribute(store, spec.humans, spec.sensitive_relation,
                                                   spec.attribute_a, spec.target_relation);
    std::vector<CountTable> counts_b;
    counts_b.reserve(spec.attribute_b.size());
    for (const EntityId b : spec.attribute_b) {
        counts_b.push_back(count_by_attribute(store, spec.humans, spec.sensitive_relation, b,
                                              spec.target_relation));
    }

    std::vector<BiasScoreRow> rows;
    rows.reserve(targets.size());
    for (const EntityId target : targets) {
        BiasScoreRow row;
        row.target = target;
        row.label = store.entities().label(target);
        row.count_a = counts_a.at(spec.attribute_a, target);
        for (std::size_t i = 0; i < spec.attribute_b.size(); ++i) {
            row.count_b += counts_b[i].at(spec.attribute_b[i], target);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

void BiasProbeSpec::validate(const TripleStore& store) const {
    store.require_relation(sensitive_relation);
    store.require_relation(target_relation);
    store.require_entity(attribute_a);
    if (attribute_b.empty()) throw ParseError("probe spec: attribute_b set is empty");
    for (const EntityId b : attribute_b) {
        store.require_entity(b);
        if (b == attribute_a) {
            throw ParseError("probe spec: attribute_a also appears in attribute_b");
        }
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ParseError("probe spec: alpha must be positive and finite");
    }
    if (humans.empty()) throw ParseError("probe spec: no humans selected");
    for (const EntityId j : humans) store.require_entity(j);
}

std::vector<double> finetune_direction(const EmbeddingModel& model, const BiasProbeSpec& spec,
                                       EntityId person) {
    std::vector<double> out(model.width());
    std::vector<double> scratch(model.width());
    probe_direction(model, spec, person, out, scratch);
    return out;
}

double probe_delta(const EmbeddingModel& model, const BiasProbeSpec& spec, EntityId person,
                   EntityId target) {
    const auto direction = finetune_direction(model, spec, person);
    const auto person_row = model.entity_row(person);
    std::vector<double> moved(person_row.begin(), person_row.end());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += spec.alpha * direction[i];
    return model.score_with_head(moved, spec.target_relation, target) -
           model.score(person, spec.target_relation, target);
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double sum = 0.0;
        for (const double v : values) sum += v;
        return sum;
    }
    const std::size_t mid = values.size() / 2;
    return pairwise_sum(values.first(mid)) + pairwise_sum(values.subspan(mid));
}

std::vector<BiasScoreRow> bias_scores(const EmbeddingModel& model, const TripleStore& store,
                                      const BiasProbeSpec& spec) {
    spec.validate(store);
    const auto targets = store.target_tails(spec.target_relation);
    auto rows = make_rows(store, spec, targets);

    const std::size_t human_count = spec.humans.size();
    const std::uint32_t width = model.width();

    // per-target buffers of per-human deltas, reduced in a fixed tree shape
    std::vector<std::vector<double>> deltas(targets.size(),
                                            std::vector<double>(human_count, 0.0));
    std::vector<double> direction(width);
    std::vector<double> scratch(width);
    std::vector<double> moved(width);

    for (std::size_t ji = 0; ji < human_count; ++ji) {
        const EntityId person = spec.humans[ji];
        probe_direction(model, spec, person, direction, scratch);
        const auto person_row = model.entity_row(person);
        for (std::uint32_t i = 0; i < width; ++i) {
            moved[i] = person_row[i] + spec.alpha * direction[i];
        }
        for (std::size_t ti = 0; ti < targets.size(); ++ti) {
            deltas[ti][ji] =
                model.score_with_head(moved, spec.target_relation, targets[ti]) -
                model.score(person, spec.target_relation, targets[ti]);
        }
    }

    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        rows[ti].bias = pairwise_sum(deltas[ti]) / static_cast<double>(human_count);
    }
    return rows;
}

std::vector<BiasScoreRow> pairwise_bias(const EmbeddingModel& model, const TripleStore& store,
                                        const BiasProbeSpec& spec, EntityId person_a,
                                        EntityId person_b) {
    spec.validate(store);
    store.require_entity(person_a);
    store.require_entity(person_b);

    const auto targets = store.target_tails(spec.target_relation);
    auto rows = make_rows(store, spec, targets);
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        rows[ti].bias = model.score(person_a, spec.target_relation, targets[ti]) -
                        model.score(person_b, spec.target_relation, targets[ti]);
    }
    return rows;
}

namespace {

HumanRule parse_human_rule(const std::string& text, RelationId sensitive_relation,
                           const TripleStore& store, const std::string& origin) {
    if (text == "has_sensitive_fact") {
        return HumanRule::has_sensitive_fact(sensitive_relation);
    }
    if (text.rfind("typed(", 0) == 0 && text.back() == ')') {
        const std::string inner = text.substr(6, text.size() - 7);
        const auto comma = inner.find(',');
        if (comma == std::string::npos) {
            throw ParseError(origin + ": human_rule typed(...) expects two arguments");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string relation = trim(inner.substr(0, comma));
        const std::string class_entity = trim(inner.substr(comma + 1));
        return HumanRule::typed(store.relations().require(relation),
                                store.entities().require(class_entity));
    }
    throw ParseError(origin + ": unknown human_rule '" + text +
                     "' (expected has_sensitive_fact or typed(<relation>, <class>))");
}

} // namespace

BiasProbeSpec load_probe_spec(const std::string& path, const TripleStore& store) {
    const KvFile kv = KvFile::parse_file(path);
    kv.require_keys_in({"sensitive_relation", "attribute_a", "attribute_b", "target_relation",
                        "alpha", "human_rule"});

    BiasProbeSpec spec;
    spec.sensitive_relation = store.relations().require(kv.get("sensitive_relation"));
    spec.attribute_a = store.entities().require(kv.get("attribute_a"));
    spec.target_relation = store.relations().require(kv.get("target_relation"));
    spec.alpha = kv.get_double_or("alpha", spec.alpha);

    // attribute_b is a comma-separated label list
    const std::string b_list = kv.get("attribute_b");
    std::size_t start = 0;
    while (start <= b_list.size()) {
        auto end = b_list.find(',', start);
        if (end == std::string::npos) end = b_list.size();
        std::string label = b_list.substr(start, end - start);
        const auto b = label.find_first_not_of(" \t");
        const auto e = label.find_last_not_of(" \t");
        label = b == std::string::npos ? std::string{} : label.substr(b, e - b + 1);
        if (!label.empty()) spec.attribute_b.push_back(store.entities().require(label));
        start = end + 1;
    }

    const HumanRule rule = parse_human_rule(kv.get_or("human_rule", "has_sensitive_fact"),
                                            spec.sensitive_relation, store, path);
    spec.humans = select_humans(store, rule);
    spec.validate(store);
    return spec;
}

} // namespace kgbias
