#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kgbias/triple_store.hpp"

namespace kgbias {

// Synthetic knowledge graphs with planted attribute/profession correlations,
// used as ground truth when validating the bias metric end to end.
struct SynthGroup {
    std::string attribute;
    // (profession label, probability); probabilities sum to 1 within 1e-9.
    std::vector<std::pair<std::string, double>> professions;
};

struct SynthSpec {
    std::uint32_t humans_per_group = 0;
    std::vector<SynthGroup> groups; // at least 2
    std::string sensitive_relation;
    std::string target_relation;
    std::uint64_t seed = 0;

    // "key = value" file. Groups use repeated entries:
    //   group = <attribute> <profession>:<prob> <profession>:<prob> ...
    static SynthSpec from_file(const std::string& path);
    void validate() const;
};

// Per human: one (human, sensitive_relation, attribute) fact and one
// (human, target_relation, profession) fact drawn from the group's
// distribution. Human labels are "p_<attribute>_<index>".
TripleStore generate(const SynthSpec& spec);

} // namespace kgbias
