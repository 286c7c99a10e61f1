#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgbias/triple_store.hpp"

namespace kgbias {

// Two score functions over embedded triples:
//   TransEDot:  s = (e_h + r) . e_t
//   ComplEx:    s = Re(<e_h, r, conj(e_t)>)
// ComplEx rows store real parts in slots [0, dim) and imaginary parts in
// [dim, 2*dim), so a row is always one flat real vector (width() slots).
enum class ModelKind : std::uint32_t { TransEDot = 0, ComplEx = 1 };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name); // ParseError if unknown

enum class Wrt { Head, Relation, Tail };

// Checkpoint format (model.kgem):
//   magic "KGEM" | model_kind u32 | dim u32 | entity_count u64 |
//   relation_count u64 | seed u64 | entity rows f64... | relation rows f64...
// Row-major, little-endian throughout.
class EmbeddingModel {
public:
    // Zero-initialized tables; rows are filled by the caller or the trainer.
    EmbeddingModel(ModelKind kind, std::uint32_t dim, std::uint64_t entity_count,
                   std::uint64_t relation_count, std::uint64_t seed = 0);

    // Rows i.i.d. uniform on [-1/sqrt(dim), +1/sqrt(dim)); same seed, same bits.
    static EmbeddingModel init_random(ModelKind kind, std::uint32_t dim,
                                      std::uint64_t entity_count, std::uint64_t relation_count,
                                      std::uint64_t seed);

    ModelKind kind() const { return kind_; }
    std::uint32_t dim() const { return dim_; }
    std::uint32_t width() const { return width_; }
    std::uint64_t entity_count() const { return entity_count_; }
    std::uint64_t relation_count() const { return relation_count_; }
    std::uint64_t seed() const { return seed_; }

    std::span<double> entity_row(EntityId id);
    std::span<const double> entity_row(EntityId id) const;
    std::span<double> relation_row(RelationId id);
    std::span<const double> relation_row(RelationId id) const;

    double score(EntityId head, RelationId relation, EntityId tail) const;

    // Same score with the head row replaced by a caller-provided vector; the
    // bias probe uses this so the stored tables are never touched.
    double score_with_head(std::span<const double> head, RelationId relation,
                           EntityId tail) const;

    // Exact analytic gradient of the score wrt one argument row.
    void score_gradient(EntityId head, RelationId relation, EntityId tail, Wrt wrt,
                        std::span<double> out) const;
    std::vector<double> score_gradient(EntityId head, RelationId relation, EntityId tail,
                                       Wrt wrt) const;

    bool all_finite() const;

    void save(const std::string& path) const;
    static EmbeddingModel load(const std::string& path);

    const std::vector<double>& entity_table() const { return entity_table_; }
    const std::vector<double>& relation_table() const { return relation_table_; }

private:
    void require_entity(EntityId id) const;
    void require_relation(RelationId id) const;

    ModelKind kind_;
    std::uint32_t dim_;
    std::uint32_t width_;
    std::uint64_t entity_count_;
    std::uint64_t relation_count_;
    std::uint64_t seed_;
    std::vector<double> entity_table_;   // entity_count x width
    std::vector<double> relation_table_; // relation_count x width
};

} // namespace kgbias
