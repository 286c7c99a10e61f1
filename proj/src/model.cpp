#include "kgbias/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "kgbias/errors.hpp"
#include "kgbias/rng.hpp"

namespace kgbias {

namespace {

constexpr char kCheckpointMagic[4] = {'K', 'G', 'E', 'M'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& origin) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError(origin + ": truncated checkpoint");
    return value;
}

double transe_score(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t) {
    double sum = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        sum += (h[i] + r[i]) * t[i];
    }
    return sum;
}

// Re(<h, r, conj(t)>) over split real/imag rows.
double complex_score(std::span<const double> h, std::span<const double> r,
                     std::span<const double> t, std::uint32_t dim) {
    double sum = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
        const double hr = h[i], hi = h[dim + i];
        const double rr = r[i], ri = r[dim + i];
        const double tr = t[i], ti = t[dim + i];
        sum += hr * rr * tr + hr * ri * ti + hi * rr * ti - hi * ri * tr;
    }
    return sum;
}

void transe_gradient(std::span<const double> h, std::span<const double> r,
                     std::span<const double> t, Wrt wrt, std::span<double> out) {
    switch (wrt) {
    case Wrt::Head:
    case Wrt::Relation:
        std::copy(t.begin(), t.end(), out.begin());
        break;
    case Wrt::Tail:
        for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] + r[i];
        break;
    }
}

void complex_gradient(std::span<const double> h, std::span<const double> r,
                      std::span<const double> t, std::uint32_t dim, Wrt wrt,
                      std::span<double> out) {
    for (std::uint32_t i = 0; i < dim; ++i) {
        const double hr = h[i], hi = h[dim + i];
        const double rr = r[i], ri = r[dim + i];
        const double tr = t[i], ti = t[dim + i];
        switch (wrt) {
        case Wrt::Head:
            out[i] = rr * tr + ri * ti;
            out[dim + i] = rr * ti - ri * tr;
            break;
        case Wrt::Relation:
            out[i] = hr * tr + hi * ti;
            out[dim + i] = hr * ti - hi * tr;
            break;
        case Wrt::Tail:
            out[i] = hr * rr - hi * ri;
            out[dim + i] = hr * ri + hi * rr;
            break;
        }
    }
}

} // namespace

const char* model_kind_name(ModelKind kind) {
    return kind == ModelKind::TransEDot ? "transe_dot" : "complex";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "transe_dot") return ModelKind::TransEDot;
    if (name == "complex") return ModelKind::ComplEx;
    throw ParseError("unknown model kind: " + name + " (expected transe_dot or complex)");
}

EmbeddingModel::EmbeddingModel(ModelKind kind, std::uint32_t dim, std::uint64_t entity_count,
                               std::uint64_t relation_count, std::uint64_t seed)
    : kind_(kind),
      dim_(dim),
      width_(kind == ModelKind::ComplEx ? 2 * dim : dim),
      entity_count_(entity_count),
      relation_count_(relation_count),
      seed_(seed),
      entity_table_(entity_count * width_, 0.0),
      relation_table_(relation_count * width_, 0.0) {
    if (dim == 0) throw ParseError("embedding dimension must be positive");
    if (entity_count == 0 || relation_count == 0) {
        throw ParseError("entity and relation counts must be positive");
    }
}

EmbeddingModel EmbeddingModel::init_random(ModelKind kind, std::uint32_t dim,
                                           std::uint64_t entity_count,
                                           std::uint64_t relation_count, std::uint64_t seed) {
    EmbeddingModel model(kind, dim, entity_count, relation_count, seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    Rng rng(seed);
    for (double& v : model.entity_table_) v = uniform_real(rng, -bound, bound);
    for (double& v : model.relation_table_) v = uniform_real(rng, -bound, bound);
    return model;
}

void EmbeddingModel::require_entity(EntityId id) const {
    if (id >= entity_count_) {
        throw LookupError("entity id out of range: " + std::to_string(id));
    }
}

void EmbeddingModel::require_relation(RelationId id) const {
    if (id >= relation_count_) {
        throw LookupError("relation id out of range: " + std::to_string(id));
    }
}

std::span<double> EmbeddingModel::entity_row(EntityId id) {
    require_entity(id);
    return {entity_table_.data() + static_cast<std::size_t>(id) * width_, width_};
}

std::span<const double> EmbeddingModel::entity_row(EntityId id) const {
    require_entity(id);
    return {entity_table_.data() + static_cast<std::size_t>(id) * width_, width_};
}

std::span<double> EmbeddingModel::relation_row(RelationId id) {
    require_relation(id);
    return {relation_table_.data() + static_cast<std::size_t>(id) * width_, width_};
}

std::span<const double> EmbeddingModel::relation_row(RelationId id) const {
    require_relation(id);
    return {relation_table_.data() + static_cast<std::size_t>(id) * width_, width_};
}

double EmbeddingModel::score(EntityId head, RelationId relation, EntityId tail) const {
    return score_with_head(entity_row(head), relation, tail);
}

double EmbeddingModel::score_with_head(std::span<const double> head, RelationId relation,
                                       EntityId tail) const {
    if (head.size() != width_) {
        throw LookupError("head vector width mismatch: " + std::to_string(head.size()));
    }
    const auto r = relation_row(relation);
    const auto t = entity_row(tail);
    return kind_ == ModelKind::TransEDot ? transe_score(head, r, t)
                                         : complex_score(head, r, t, dim_);
}

void EmbeddingModel::score_gradient(EntityId head, RelationId relation, EntityId tail, Wrt wrt,
                                    std::span<double> out) const {
    if (out.size() != width_) {
        throw LookupError("gradient buffer width mismatch: " + std::to_string(out.size()));
    }
    const auto h = entity_row(head);
    const auto r = relation_row(relation);
    const auto t = entity_row(tail);
    if (kind_ == ModelKind::TransEDot) {
        transe_gradient(h, r, t, wrt, out);
    } else {
        complex_gradient(h, r, t, dim_, wrt, out);
    }
}

std::vector<double> EmbeddingModel::score_gradient(EntityId head, RelationId relation,
                                                   EntityId tail, Wrt wrt) const {
    std::vector<double> out(width_);
    score_gradient(head, relation, tail, wrt, out);
    return out;
}

bool EmbeddingModel::all_finite() const {
    auto finite = [](const std::vector<double>& table) {
        return std::all_of(table.begin(), table.end(),
                           [](double v) { return std::isfinite(v); });
    };
    return finite(entity_table_) && finite(relation_table_);
}

void EmbeddingModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(out, static_cast<std::uint32_t>(kind_));
    write_pod(out, dim_);
    write_pod(out, entity_count_);
    write_pod(out, relation_count_);
    write_pod(out, seed_);
    out.write(reinterpret_cast<const char*>(entity_table_.data()),
              static_cast<std::streamsize>(entity_table_.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(relation_table_.data()),
              static_cast<std::streamsize>(relation_table_.size() * sizeof(double)));
    if (!out) throw ParseError("write failed: " + path);
}

EmbeddingModel EmbeddingModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path);

    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw ParseError(path + ": not a model checkpoint");
    }
    const auto kind_raw = read_pod<std::uint32_t>(in, path);
    if (kind_raw > 1) throw ParseError(path + ": unknown model kind in checkpoint");
    const auto dim = read_pod<std::uint32_t>(in, path);
    const auto entity_count = read_pod<std::uint64_t>(in, path);
    const auto relation_count = read_pod<std::uint64_t>(in, path);
    const auto seed = read_pod<std::uint64_t>(in, path);

    EmbeddingModel model(static_cast<ModelKind>(kind_raw), dim, entity_count, relation_count,
                         seed);
    in.read(reinterpret_cast<char*>(model.entity_table_.data()),
            static_cast<std::streamsize>(model.entity_table_.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(model.relation_table_.data()),
            static_cast<std::streamsize>(model.relation_table_.size() * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated checkpoint");
    return model;
}

} // namespace kgbias
