#include "kgbias/synthgen.hpp"

#include <cmath>
#include <sstream>

#include "kgbias/errors.hpp"
#include "kgbias/kvfile.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

namespace {

SynthGroup parse_group(const std::string& value, const std::string& origin, int line) {
    std::istringstream in(value);
    SynthGroup group;
    if (!(in >> group.attribute)) {
        throw ParseError(origin + ":" + std::to_string(line) + ": group entry needs an attribute");
    }
    std::string item;
    while (in >> item) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
            throw ParseError(origin + ":" + std::to_string(line) + ": expected <profession>:<prob>, got '" +
                             item + "'");
        }
        double prob = 0.0;
        try {
            std::size_t used = 0;
            prob = std::stod(item.substr(colon + 1), &used);
            if (used != item.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(origin + ":" + std::to_string(line) + ": bad probability in '" + item + "'");
        }
        group.professions.emplace_back(item.substr(0, colon), prob);
    }
    if (group.professions.empty()) {
        throw ParseError(origin + ":" + std::to_string(line) + ": group '" + group.attribute +
                         "' lists no professions");
    }
    return group;
}

} // namespace

SynthSpec SynthSpec::from_file(const std::string& path) {
    const KvFile kv = KvFile::parse_file(path);
    kv.require_keys_in({"humans_per_group", "group", "sensitive_relation", "target_relation",
                        "seed"});

    SynthSpec spec;
    spec.humans_per_group = static_cast<std::uint32_t>(kv.get_int("humans_per_group"));
    spec.sensitive_relation = kv.get("sensitive_relation");
    spec.target_relation = kv.get("target_relation");
    spec.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", 0));

    for (const KvEntry& entry : kv.entries()) {
        if (entry.key == "group") {
            spec.groups.push_back(parse_group(entry.value, kv.origin(), entry.line));
        }
    }
    spec.validate();
    return spec;
}

void SynthSpec::validate() const {
    if (humans_per_group == 0) throw ParseError("synth spec: humans_per_group must be positive");
    if (groups.size() < 2) throw ParseError("synth spec: need at least 2 groups");
    if (sensitive_relation.empty() || target_relation.empty()) {
        throw ParseError("synth spec: sensitive_relation and target_relation are required");
    }
    for (const SynthGroup& group : groups) {
        double total = 0.0;
        for (const auto& [label, prob] : group.professions) {
            if (prob < 0.0 || !std::isfinite(prob)) {
                throw ParseError("synth spec: group '" + group.attribute + "' has a bad probability for '" +
                                 label + "'");
            }
            total += prob;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ParseError("synth spec: group '" + group.attribute +
                             "' probabilities sum to " + std::to_string(total) + ", expected 1");
        }
    }
}

TripleStore generate(const SynthSpec& spec) {
    spec.validate();
    TripleStore store;
    Rng rng(spec.seed);
    for (const SynthGroup& group : spec.groups) {
        for (std::uint32_t i = 0; i < spec.humans_per_group; ++i) {
            const std::string person = "p_" + group.attribute + "_" + std::to_string(i);
            store.add(person, spec.sensitive_relation, group.attribute);

            // inverse-CDF draw over the group's profession distribution
            const double u = uniform_unit(rng);
            double cum = 0.0;
            const std::string* chosen = &group.professions.back().first;
            for (const auto& [label, prob] : group.professions) {
                cum += prob;
                if (u < cum) {
                    chosen = &label;
                    break;
                }
            }
            store.add(person, spec.target_relation, *chosen);
        }
    }
    return store;
}

} // namespace kgbias
