#include "kgbias/triple_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "kgbias/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "store and checkpoint files are little-endian; big-endian hosts unsupported");

namespace kgbias {

namespace {

constexpr char kStoreMagic[4] = {'K', 'G', 'T', 'S'};
constexpr std::uint32_t kStoreVersion = 1;

std::uint64_t head_relation_key(EntityId head, RelationId relation) {
    return (static_cast<std::uint64_t>(head) << 32) | relation;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& origin) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError(origin + ": truncated file");
    return value;
}

} // namespace

// ---- Vocab ----

std::uint32_t Vocab::intern(const std::string& label) {
    auto it = ids_.find(label);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(label_list_.size());
    label_list_.push_back(label);
    ids_.emplace(label, id);
    return id;
}

std::optional<std::uint32_t> Vocab::find(const std::string& label) const {
    auto it = ids_.find(label);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Vocab::require(const std::string& label) const {
    auto id = find(label);
    if (!id) throw LookupError("unknown label: " + label);
    return *id;
}

const std::string& Vocab::label(std::uint32_t id) const {
    if (id >= label_list_.size()) {
        throw LookupError("vocabulary id out of range: " + std::to_string(id));
    }
    return label_list_[id];
}

void Vocab::save(std::ostream& out) const {
    write_pod(out, static_cast<std::uint64_t>(label_list_.size()));
    for (const auto& label : label_list_) {
        write_pod(out, static_cast<std::uint32_t>(label.size()));
        out.write(label.data(), static_cast<std::streamsize>(label.size()));
    }
}

void Vocab::load(std::istream& in, const std::string& origin) {
    label_list_.clear();
    ids_.clear();
    const auto count = read_pod<std::uint64_t>(in, origin);
    label_list_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = read_pod<std::uint32_t>(in, origin);
        std::string label(len, '\0');
        in.read(label.data(), len);
        if (!in) throw ParseError(origin + ": truncated vocabulary entry");
        ids_.emplace(label, static_cast<std::uint32_t>(i));
        label_list_.push_back(std::move(label));
    }
}

void Vocab::write_csv(std::ostream& out) const {
    out << "id,label\n";
    for (std::size_t id = 0; id < label_list_.size(); ++id) {
        out << id << ',' << label_list_[id] << '\n';
    }
}

// ---- CountTable ----

void CountTable::add(EntityId attribute, EntityId target, std::int64_t n) {
    rows_[(static_cast<std::uint64_t>(attribute) << 32) | target] += n;
}

std::int64_t CountTable::at(EntityId attribute, EntityId target) const {
    auto it = rows_.find((static_cast<std::uint64_t>(attribute) << 32) | target);
    return it == rows_.end() ? 0 : it->second;
}

// ---- TripleStore ----

bool TripleStore::add(const std::string& head, const std::string& relation,
                      const std::string& tail) {
    const EntityId h = entity_vocab_.intern(head);
    const RelationId r = relation_vocab_.intern(relation);
    const EntityId t = entity_vocab_.intern(tail);
    if (contains(h, r, t)) return false;
    triples_.push_back({h, r, t});
    by_head_relation_[head_relation_key(h, r)].push_back(t);
    return true;
}

bool TripleStore::contains(EntityId head, RelationId relation, EntityId tail) const {
    auto it = by_head_relation_.find(head_relation_key(head, relation));
    if (it == by_head_relation_.end()) return false;
    const auto& tails = it->second;
    return std::find(tails.begin(), tails.end(), tail) != tails.end();
}

std::span<const EntityId> TripleStore::tails(EntityId head, RelationId relation) const {
    auto it = by_head_relation_.find(head_relation_key(head, relation));
    if (it == by_head_relation_.end()) return {};
    return it->second;
}

std::vector<EntityId> TripleStore::target_tails(RelationId relation) const {
    require_relation(relation);
    std::vector<EntityId> out;
    for (const auto& triple : triples_) {
        if (triple.relation == relation) out.push_back(triple.tail);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void TripleStore::require_entity(EntityId id) const {
    if (id >= entity_vocab_.size()) {
        throw LookupError("entity id out of range: " + std::to_string(id));
    }
}

void TripleStore::require_relation(RelationId id) const {
    if (id >= relation_vocab_.size()) {
        throw LookupError("relation id out of range: " + std::to_string(id));
    }
}

void TripleStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write store file: " + path);
    out.write(kStoreMagic, sizeof(kStoreMagic));
    write_pod(out, kStoreVersion);
    entity_vocab_.save(out);
    relation_vocab_.save(out);
    write_pod(out, static_cast<std::uint64_t>(triples_.size()));
    for (const auto& triple : triples_) {
        write_pod(out, triple.head);
        write_pod(out, triple.relation);
        write_pod(out, triple.tail);
    }
    if (!out) throw ParseError("write failed: " + path);
}

TripleStore TripleStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open store file: " + path);

    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kStoreMagic, sizeof(magic)) != 0) {
        throw ParseError(path + ": not a triple store file");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kStoreVersion) {
        throw ParseError(path + ": unsupported store version " + std::to_string(version));
    }

    TripleStore store;
    store.entity_vocab_.load(in, path);
    store.relation_vocab_.load(in, path);
    const auto count = read_pod<std::uint64_t>(in, path);
    store.triples_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Triple triple;
        triple.head = read_pod<EntityId>(in, path);
        triple.relation = read_pod<RelationId>(in, path);
        triple.tail = read_pod<EntityId>(in, path);
        if (triple.head >= store.entity_vocab_.size() ||
            triple.tail >= store.entity_vocab_.size() ||
            triple.relation >= store.relation_vocab_.size()) {
            throw ParseError(path + ": triple id out of vocabulary range");
        }
        store.triples_.push_back(triple);
        store.by_head_relation_[head_relation_key(triple.head, triple.relation)].push_back(
            triple.tail);
    }
    return store;
}

void TripleStore::write_tsv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write triples file: " + path);
    for (const auto& triple : triples_) {
        const std::string& h = entity_vocab_.label(triple.head);
        const std::string& r = relation_vocab_.label(triple.relation);
        const std::string& t = entity_vocab_.label(triple.tail);
        out << h << '\t' << r << '\t' << t << '\n';
    }
    if (!out) throw ParseError("write failed: " + path);
}

TripleStore load_triples(const std::string& path, TripleFormat format, LoadStats* stats) {
    (void)format; // only Tsv today
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open triples file: " + path);

    TripleStore store;
    LoadStats local;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        local.lines++;

        const auto tab1 = line.find('\t');
        const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        const auto tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
        if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos) {
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 3 tab-separated fields");
        }
        const std::string head = line.substr(0, tab1);
        const std::string relation = line.substr(tab1 + 1, tab2 - tab1 - 1);
        const std::string tail = line.substr(tab2 + 1);
        if (head.empty() || relation.empty() || tail.empty()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": empty field");
        }
        store.add(head, relation, tail);
    }
    if (store.triples().empty()) {
        throw ParseError(path + ": no triples found");
    }
    local.unique_triples = store.triples().size();
    if (stats) *stats = local;
    return store;
}

// ---- human selection and counts ----

HumanRule HumanRule::has_sensitive_fact(RelationId relation) {
    return {HumanRuleKind::HasSensitiveFact, relation, 0};
}

HumanRule HumanRule::typed(RelationId relation, EntityId class_entity) {
    return {HumanRuleKind::Typed, relation, class_entity};
}

std::vector<EntityId> select_humans(const TripleStore& store, const HumanRule& rule) {
    store.require_relation(rule.relation);
    if (rule.kind == HumanRuleKind::Typed) store.require_entity(rule.class_entity);

    std::vector<EntityId> out;
    for (const auto& triple : store.triples()) {
        if (triple.relation != rule.relation) continue;
        if (rule.kind == HumanRuleKind::Typed && triple.tail != rule.class_entity) continue;
        out.push_back(triple.head);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

CountTable count_by_attribute(const TripleStore& store, std::span<const EntityId> humans,
                              RelationId sensitive_relation, EntityId attribute,
                              RelationId target_relation) {
    store.require_relation(sensitive_relation);
    store.require_relation(target_relation);
    store.require_entity(attribute);

    CountTable table;
    for (const EntityId human : humans) {
        store.require_entity(human);
        if (!store.contains(human, sensitive_relation, attribute)) continue;
        for (const EntityId target : store.tails(human, target_relation)) {
            table.add(attribute, target, 1);
        }
    }
    return table;
}

} // namespace kgbias
