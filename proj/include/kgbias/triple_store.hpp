#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgbias {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    bool operator==(const Triple&) const = default;
};

// Interned label table. Ids are dense and assigned in first-appearance order,
// so rebuilding the vocabulary from the same input reproduces the same ids.
class Vocab {
public:
    std::uint32_t intern(const std::string& label);

    std::optional<std::uint32_t> find(const std::string& label) const;
    std::uint32_t require(const std::string& label) const; // LookupError if unknown
    const std::string& label(std::uint32_t id) const;      // LookupError if out of range

    std::size_t size() const { return label_list_.size(); }
    const std::vector<std::string>& labels() const { return label_list_; }

    void save(std::ostream& out) const;
    void load(std::istream& in, const std::string& origin);
    void write_csv(std::ostream& out) const; // "id,label" rows

private:
    std::vector<std::string> label_list_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

enum class TripleFormat { Tsv };

// Per-(attribute, target-tail) human counts, the C columns of a bias report.
class CountTable {
public:
    void add(EntityId attribute, EntityId target, std::int64_t n);
    std::int64_t at(EntityId attribute, EntityId target) const; // 0 when absent
    std::size_t size() const { return rows_.size(); }

private:
    std::unordered_map<std::uint64_t, std::int64_t> rows_;
};

// Deduplicated (head, relation, tail) facts with interned vocabularies and a
// (head, relation) -> tails index. Read-only once built; construction is
// single-threaded.
class TripleStore {
public:
    // Returns false when the triple was already present.
    bool add(const std::string& head, const std::string& relation, const std::string& tail);

    const std::vector<Triple>& triples() const { return triples_; }
    const Vocab& entities() const { return entity_vocab_; }
    const Vocab& relations() const { return relation_vocab_; }

    bool contains(EntityId head, RelationId relation, EntityId tail) const;
    std::span<const EntityId> tails(EntityId head, RelationId relation) const;

    // Distinct tails observed under the relation, ascending by id.
    std::vector<EntityId> target_tails(RelationId relation) const;

    void require_entity(EntityId id) const;
    void require_relation(RelationId id) const;

    void save(const std::string& path) const;
    static TripleStore load(const std::string& path);

    void write_tsv(const std::string& path) const;

private:
    std::vector<Triple> triples_;
    Vocab entity_vocab_;
    Vocab relation_vocab_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> by_head_relation_;
};

struct LoadStats {
    std::size_t lines = 0;          // non-empty lines seen
    std::size_t unique_triples = 0; // stored after dedup
};

// Reads "head<TAB>relation<TAB>tail" lines, UTF-8, no header. Duplicate
// triples collapse to one. ParseError names the offending line.
TripleStore load_triples(const std::string& path, TripleFormat format = TripleFormat::Tsv,
                         LoadStats* stats = nullptr);

// Human-entity selector: either "has at least one fact under the sensitive
// relation" or "is typed (h, relation, class_entity)".
enum class HumanRuleKind { HasSensitiveFact, Typed };

struct HumanRule {
    HumanRuleKind kind = HumanRuleKind::HasSensitiveFact;
    RelationId relation = 0;
    EntityId class_entity = 0; // meaningful for Typed only

    static HumanRule has_sensitive_fact(RelationId relation);
    static HumanRule typed(RelationId relation, EntityId class_entity);
};

// Entities matching the rule, ascending by id.
std::vector<EntityId> select_humans(const TripleStore& store, const HumanRule& rule);

// For every tail t under target_relation, counts the humans j holding both
// (j, sensitive_relation, attribute) and (j, target_relation, t). The result
// holds the rows for this one attribute.
CountTable count_by_attribute(const TripleStore& store, std::span<const EntityId> humans,
                              RelationId sensitive_relation, EntityId attribute,
                              RelationId target_relation);

} // namespace kgbias
