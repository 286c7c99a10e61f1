#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgbias/model.hpp"
#include "kgbias/rng.hpp"
#include "kgbias/triple_store.hpp"

namespace kgbias {

enum class Optimizer { Sgd, Adagrad };

struct TrainConfig {
    ModelKind model = ModelKind::TransEDot;
    std::uint32_t dim = 200;
    std::uint32_t negatives = 1000; // per positive
    std::uint32_t epochs = 50;
    double learning_rate = 0.1;
    Optimizer optimizer = Optimizer::Adagrad;
    std::uint32_t batch_size = 1; // positives per optimizer step
    std::uint64_t seed = 1;
    std::uint32_t threads = 1; // >1 trades bit-determinism for speed

    // "key = value" file; unknown keys are rejected.
    static TrainConfig from_file(const std::string& path);
    void validate() const;
};

struct LossRecord {
    std::uint32_t epoch = 0; // 1-based
    double mean_loss = 0.0;
};

// k corruptions of the positive: each copies it and replaces one side (head
// or tail with p = 0.5 each) by a uniform entity other than the one replaced.
// Sampled with replacement; accidental true triples are kept.
std::vector<Triple> sample_negatives(const TripleStore& store, const Triple& positive,
                                     std::uint32_t k, Rng& rng);

// loss = -log softmax(scores)[positive_index], with max-subtraction.
// grad_out[i] = softmax(scores)[i] - [i == positive_index].
double softmax_ce_loss(std::span<const double> scores, std::size_t positive_index,
                       std::span<double> grad_out);

// Sparse per-row gradient accumulator, reused across steps. Keys address
// entity rows and relation rows in one space.
class RowGradAccumulator {
public:
    static std::uint64_t entity_key(EntityId id) { return id; }
    static std::uint64_t relation_key(RelationId id) { return (1ULL << 32) | id; }
    static bool is_relation_key(std::uint64_t key) { return (key >> 32) != 0; }
    static std::uint32_t row_of(std::uint64_t key) { return static_cast<std::uint32_t>(key); }

    void reset(std::uint32_t width);
    std::span<double> touch(std::uint64_t key); // zeroed on first touch after reset

    std::size_t touched() const { return keys_.size(); }
    std::uint64_t key_at(std::size_t i) const { return keys_[i]; }
    std::span<const double> grad_at(std::size_t i) const;
    std::span<double> grad_at(std::size_t i);

private:
    std::uint32_t width_ = 0;
    std::unordered_map<std::uint64_t, std::size_t> index_;
    std::vector<std::uint64_t> keys_;
    std::vector<double> pool_; // keys_.size() x width_
};

// Scratch buffers for one positive + its negatives.
struct StepWorkspace {
    std::vector<double> scores;
    std::vector<double> loss_grad;
    std::vector<double> row_scratch;
    RowGradAccumulator rows;
};

// Scores the positive (index 0) and negatives, then chains the softmax-CE
// gradient through the score gradients into per-row gradients, accumulated
// into ws.rows (not reset here, so batches can pool). Returns the loss.
double positive_loss_gradients(const EmbeddingModel& model, const Triple& positive,
                               std::span<const Triple> negatives, StepWorkspace& ws);

struct TrainResult {
    EmbeddingModel model;
    std::vector<LossRecord> losses;
};

// Negative-sampling softmax-CE training loop. Deterministic for a fixed seed
// when config.threads == 1.
TrainResult train(const TripleStore& store, const TrainConfig& config);

} // namespace kgbias
