#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgbias/model.hpp"
#include "kgbias/triple_store.hpp"

namespace kgbias {

// One audit: push each human's embedding toward attribute_a and away from
// the attribute_b set along the sensitive relation, then rank target tails
// by the induced score change. The model is never mutated.
struct BiasProbeSpec {
    RelationId sensitive_relation = 0;
    EntityId attribute_a = 0;
    std::vector<EntityId> attribute_b; // non-empty; >1 entries = one-vs-rest
    RelationId target_relation = 0;
    double alpha = 0.01;
    std::vector<EntityId> humans; // ascending, non-empty

    void validate(const TripleStore& store) const;
};

struct BiasScoreRow {
    EntityId target = 0;
    std::string label;
    double bias = 0.0; // b_p column of a report
    std::int64_t count_a = 0;
    std::int64_t count_b = 0;
};

// Gradient wrt the person's embedding of
//   m = g(e_j, r_s, e_a) - mean_b g(e_j, r_s, e_b)
// i.e. the direction a one-step finetune at rate alpha would move e_j.
std::vector<double> finetune_direction(const EmbeddingModel& model, const BiasProbeSpec& spec,
                                       EntityId person);

// Score change for one target tail after the probe step:
//   g(e_j + alpha * direction, r_t, e_t) - g(e_j, r_t, e_t)
double probe_delta(const EmbeddingModel& model, const BiasProbeSpec& spec, EntityId person,
                   EntityId target);

// One row per distinct tail under the target relation, unfiltered, ascending
// by target id. bias is the per-human probe delta averaged over spec.humans
// with a fixed pairwise reduction, so results do not depend on scheduling.
std::vector<BiasScoreRow> bias_scores(const EmbeddingModel& model, const TripleStore& store,
                                      const BiasProbeSpec& spec);

// The two-fixed-entities baseline: per target, score difference between
// person_a and person_b. Counts attached exactly as in bias_scores.
std::vector<BiasScoreRow> pairwise_bias(const EmbeddingModel& model, const TripleStore& store,
                                        const BiasProbeSpec& spec, EntityId person_a,
                                        EntityId person_b);

// Parses a probe "key = value" file (sensitive_relation, attribute_a,
// attribute_b comma list, target_relation, alpha, human_rule) and resolves
// labels against the store. human_rule is "has_sensitive_fact" (default) or
// "typed(<relation>, <class>)".
BiasProbeSpec load_probe_spec(const std::string& path, const TripleStore& store);

// Deterministic fixed-shape tree reduction; exposed for tests.
double pairwise_sum(std::span<const double> values);

} // namespace kgbias
