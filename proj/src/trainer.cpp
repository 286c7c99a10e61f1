#include "kgbias/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "kgbias/errors.hpp"
#include "kgbias/kvfile.hpp"

namespace kgbias {

namespace {

constexpr double kAdagradEps = 1e-8;

Optimizer optimizer_from_name(const std::string& name) {
    if (name == "sgd") return Optimizer::Sgd;
    if (name == "adagrad") return Optimizer::Adagrad;
    throw ParseError("unknown optimizer: " + name + " (expected sgd or adagrad)");
}

} // namespace

TrainConfig TrainConfig::from_file(const std::string& path) {
    const KvFile kv = KvFile::parse_file(path);
    kv.require_keys_in({"model", "dim", "negatives", "epochs", "learning_rate", "optimizer",
                        "batch_size", "seed", "threads"});

    TrainConfig config;
    config.model = model_kind_from_name(kv.get_or("model", "transe_dot"));
    config.dim = static_cast<std::uint32_t>(kv.get_int_or("dim", config.dim));
    config.negatives = static_cast<std::uint32_t>(kv.get_int_or("negatives", config.negatives));
    config.epochs = static_cast<std::uint32_t>(kv.get_int_or("epochs", config.epochs));
    config.learning_rate = kv.get_double_or("learning_rate", config.learning_rate);
    config.optimizer = optimizer_from_name(kv.get_or("optimizer", "adagrad"));
    config.batch_size = static_cast<std::uint32_t>(kv.get_int_or("batch_size", config.batch_size));
    config.seed = static_cast<std::uint64_t>(kv.get_int_or("seed", static_cast<std::int64_t>(config.seed)));
    config.threads = static_cast<std::uint32_t>(kv.get_int_or("threads", config.threads));
    config.validate();
    return config;
}

void TrainConfig::validate() const {
    if (dim == 0) throw ParseError("train config: dim must be positive");
    if (negatives == 0) throw ParseError("train config: negatives must be positive");
    if (epochs == 0) throw ParseError("train config: epochs must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ParseError("train config: learning_rate must be finite and non-negative");
    }
    if (batch_size == 0) throw ParseError("train config: batch_size must be positive");
    if (threads == 0) throw ParseError("train config: threads must be positive");
}

std::vector<Triple> sample_negatives(const TripleStore& store, const Triple& positive,
                                     std::uint32_t k, Rng& rng) {
    const std::uint64_t entity_count = store.entities().size();
    if (entity_count < 2) {
        throw ParseError("cannot corrupt triples: entity vocabulary has fewer than 2 entries");
    }
    std::vector<Triple> negatives;
    negatives.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) {
        Triple corrupted = positive;
        const bool corrupt_head = uniform_index(rng, 2) == 0;
        const EntityId replaced = corrupt_head ? positive.head : positive.tail;
        // uniform over all entities except the one replaced
        auto drawn = static_cast<EntityId>(uniform_index(rng, entity_count - 1));
        if (drawn >= replaced) ++drawn;
        (corrupt_head ? corrupted.head : corrupted.tail) = drawn;
        negatives.push_back(corrupted);
    }
    return negatives;
}

double softmax_ce_loss(std::span<const double> scores, std::size_t positive_index,
                       std::span<double> grad_out) {
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        grad_out[i] = std::exp(scores[i] - max_score);
        z += grad_out[i];
    }
    for (std::size_t i = 0; i < scores.size(); ++i) grad_out[i] /= z;
    grad_out[positive_index] -= 1.0;
    return max_score + std::log(z) - scores[positive_index];
}

void RowGradAccumulator::reset(std::uint32_t width) {
    width_ = width;
    index_.clear();
    keys_.clear();
    // pool_ keeps its capacity; buffers are re-zeroed on touch
}

std::span<double> RowGradAccumulator::touch(std::uint64_t key) {
    auto it = index_.find(key);
    if (it != index_.end()) {
        return {pool_.data() + it->second * width_, width_};
    }
    const std::size_t slot = keys_.size();
    index_.emplace(key, slot);
    keys_.push_back(key);
    if (pool_.size() < (slot + 1) * width_) pool_.resize((slot + 1) * width_);
    std::span<double> grad{pool_.data() + slot * width_, width_};
    std::fill(grad.begin(), grad.end(), 0.0);
    return grad;
}

std::span<const double> RowGradAccumulator::grad_at(std::size_t i) const {
    return {pool_.data() + i * width_, width_};
}

std::span<double> RowGradAccumulator::grad_at(std::size_t i) {
    return {pool_.data() + i * width_, width_};
}

double positive_loss_gradients(const EmbeddingModel& model, const Triple& positive,
                               std::span<const Triple> negatives, StepWorkspace& ws) {
    const std::size_t n = negatives.size() + 1;
    const std::uint32_t width = model.width();
    ws.scores.resize(n);
    ws.loss_grad.resize(n);
    ws.row_scratch.resize(width);

    ws.scores[0] = model.score(positive.head, positive.relation, positive.tail);
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        ws.scores[i + 1] = model.score(negatives[i].head, negatives[i].relation,
                                       negatives[i].tail);
    }
    const double loss = softmax_ce_loss(ws.scores, 0, ws.loss_grad);

    auto accumulate = [&](const Triple& triple, double weight) {
        const std::pair<Wrt, std::uint64_t> slots[3] = {
            {Wrt::Head, RowGradAccumulator::entity_key(triple.head)},
            {Wrt::Relation, RowGradAccumulator::relation_key(triple.relation)},
            {Wrt::Tail, RowGradAccumulator::entity_key(triple.tail)},
        };
        for (const auto& [wrt, key] : slots) {
            model.score_gradient(triple.head, triple.relation, triple.tail, wrt,
                                 ws.row_scratch);
            auto grad = ws.rows.touch(key);
            for (std::uint32_t d = 0; d < width; ++d) grad[d] += weight * ws.row_scratch[d];
        }
    };

    accumulate(positive, ws.loss_grad[0]);
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        accumulate(negatives[i], ws.loss_grad[i + 1]);
    }
    return loss;
}

namespace {

struct OptimizerState {
    std::vector<double> entity_acc;
    std::vector<double> relation_acc;
};

void apply_row_update(std::span<double> row, std::span<double> acc, std::span<const double> grad,
                      double learning_rate, Optimizer optimizer) {
    if (optimizer == Optimizer::Sgd) {
        for (std::size_t i = 0; i < row.size(); ++i) row[i] -= learning_rate * grad[i];
        return;
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
        acc[i] += grad[i] * grad[i];
        row[i] -= learning_rate * grad[i] / (std::sqrt(acc[i]) + kAdagradEps);
    }
}

class UpdateApplier {
public:
    UpdateApplier(EmbeddingModel& model, OptimizerState& state, const TrainConfig& config)
        : model_(model), state_(state), config_(config) {}

    void apply(const RowGradAccumulator& rows) {
        const std::uint32_t width = model_.width();
        for (std::size_t i = 0; i < rows.touched(); ++i) {
            const std::uint64_t key = rows.key_at(i);
            const std::uint32_t row_id = RowGradAccumulator::row_of(key);
            std::span<double> row;
            std::span<double> acc;
            if (RowGradAccumulator::is_relation_key(key)) {
                row = model_.relation_row(row_id);
                acc = {state_.relation_acc.data() + static_cast<std::size_t>(row_id) * width,
                       width};
            } else {
                row = model_.entity_row(row_id);
                acc = {state_.entity_acc.data() + static_cast<std::size_t>(row_id) * width,
                       width};
            }
            apply_row_update(row, acc, rows.grad_at(i), config_.learning_rate,
                             config_.optimizer);
        }
    }

    // Parallel variant; each row is locked through a striped mutex pool.
    void apply_locked(const RowGradAccumulator& rows, std::vector<std::mutex>& stripes) {
        const std::uint32_t width = model_.width();
        for (std::size_t i = 0; i < rows.touched(); ++i) {
            const std::uint64_t key = rows.key_at(i);
            const std::uint32_t row_id = RowGradAccumulator::row_of(key);
            std::span<double> row;
            std::span<double> acc;
            if (RowGradAccumulator::is_relation_key(key)) {
                row = model_.relation_row(row_id);
                acc = {state_.relation_acc.data() + static_cast<std::size_t>(row_id) * width,
                       width};
            } else {
                row = model_.entity_row(row_id);
                acc = {state_.entity_acc.data() + static_cast<std::size_t>(row_id) * width,
                       width};
            }
            std::lock_guard<std::mutex> guard(stripes[key % stripes.size()]);
            apply_row_update(row, acc, rows.grad_at(i), config_.learning_rate,
                             config_.optimizer);
        }
    }

private:
    EmbeddingModel& model_;
    OptimizerState& state_;
    const TrainConfig& config_;
};

[[noreturn]] void throw_non_finite(const TripleStore& store, const Triple& triple) {
    throw NumericError("non-finite loss at triple (" + store.entities().label(triple.head) +
                       ", " + store.relations().label(triple.relation) + ", " +
                       store.entities().label(triple.tail) + ")");
}

double train_epoch_serial(const TripleStore& store, const TrainConfig& config,
                          EmbeddingModel& model, OptimizerState& state,
                          std::vector<std::size_t>& order, Rng& rng, StepWorkspace& ws) {
    const auto& triples = store.triples();
    UpdateApplier applier(model, state, config);
    double loss_sum = 0.0;

    std::size_t at = 0;
    while (at < order.size()) {
        const std::size_t batch_end = std::min(at + config.batch_size, order.size());
        ws.rows.reset(model.width());
        for (; at < batch_end; ++at) {
            const Triple& positive = triples[order[at]];
            const auto negatives = sample_negatives(store, positive, config.negatives, rng);
            const double loss = positive_loss_gradients(model, positive, negatives, ws);
            if (!std::isfinite(loss)) throw_non_finite(store, positive);
            loss_sum += loss;
        }
        applier.apply(ws.rows);
    }
    return loss_sum / static_cast<double>(order.size());
}

double train_epoch_parallel(const TripleStore& store, const TrainConfig& config,
                            EmbeddingModel& model, OptimizerState& state,
                            const std::vector<std::size_t>& order, std::uint64_t epoch_salt,
                            std::vector<std::mutex>& stripes) {
    const auto& triples = store.triples();
    const std::uint32_t workers =
        std::min<std::uint32_t>(config.threads, static_cast<std::uint32_t>(order.size()));
    std::vector<double> worker_loss(workers, 0.0);
    std::vector<std::exception_ptr> worker_error(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);

    const std::size_t chunk = (order.size() + workers - 1) / workers;
    for (std::uint32_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                Rng rng(mix_seed(config.seed, epoch_salt * 8191 + w));
                StepWorkspace ws;
                UpdateApplier applier(model, state, config);
                const std::size_t begin = w * chunk;
                const std::size_t end = std::min(begin + chunk, order.size());
                std::size_t at = begin;
                while (at < end) {
                    const std::size_t batch_end = std::min(at + config.batch_size, end);
                    ws.rows.reset(model.width());
                    for (; at < batch_end; ++at) {
                        const Triple& positive = triples[order[at]];
                        const auto negatives =
                            sample_negatives(store, positive, config.negatives, rng);
                        const double loss =
                            positive_loss_gradients(model, positive, negatives, ws);
                        if (!std::isfinite(loss)) throw_non_finite(store, positive);
                        worker_loss[w] += loss;
                    }
                    applier.apply_locked(ws.rows, stripes);
                }
            } catch (...) {
                worker_error[w] = std::current_exception();
            }
        });
    }
    for (auto& thread : pool) thread.join();
    for (const auto& error : worker_error) {
        if (error) std::rethrow_exception(error);
    }
    const double total = std::accumulate(worker_loss.begin(), worker_loss.end(), 0.0);
    return total / static_cast<double>(order.size());
}

} // namespace

TrainResult train(const TripleStore& store, const TrainConfig& config) {
    config.validate();
    if (store.triples().empty()) throw ParseError("cannot train on an empty store");
    if (store.entities().size() < 2) {
        throw ParseError("cannot train: entity vocabulary has fewer than 2 entries");
    }

    EmbeddingModel model = EmbeddingModel::init_random(
        config.model, config.dim, store.entities().size(), store.relations().size(),
        config.seed);

    // SGD never reads the accumulators; allocating them anyway keeps the
    // update path span-taking unconditional.
    OptimizerState state;
    state.entity_acc.assign(model.entity_table().size(), 0.0);
    state.relation_acc.assign(model.relation_table().size(), 0.0);

    std::vector<std::size_t> order(store.triples().size());
    std::iota(order.begin(), order.end(), 0);

    Rng rng(mix_seed(config.seed, 0));
    StepWorkspace ws;
    std::vector<std::mutex> stripes(config.threads > 1 ? 1024 : 0);

    std::vector<LossRecord> losses;
    losses.reserve(config.epochs);
    for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        double mean_loss = 0.0;
        if (config.threads <= 1) {
            mean_loss = train_epoch_serial(store, config, model, state, order, rng, ws);
        } else {
            mean_loss = train_epoch_parallel(store, config, model, state, order, epoch,
                                             stripes);
        }
        losses.push_back({epoch, mean_loss});
    }
    return {std::move(model), std::move(losses)};
}

} // namespace kgbias
