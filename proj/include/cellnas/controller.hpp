#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cellnas/rng.hpp"
#include "cellnas/search_space.hpp"

namespace cellnas {

struct ControllerShape {
    std::uint32_t num_actions = kNumOperators;  ///< softmax width; the null start token is id num_actions
    std::uint32_t embed_dim = 16;
    std::uint32_t hidden_dim = 64;
    std::uint32_t steps = 7;                    ///< cells generated per episode

    void validate() const;
    std::size_t parameter_count() const;
    friend bool operator==(const ControllerShape&, const ControllerShape&) = default;
};

/// All controller weights in one flat buffer:
///   embedding  (num_actions+1) x embed_dim, row num_actions = null token
///   lstm_w     4*hidden x embed_dim   gate blocks ordered input, forget, cell, output
///   lstm_u     4*hidden x hidden
///   lstm_b     4*hidden
///   out_w      hidden x num_actions
///   out_b      num_actions
class ControllerParams {
public:
    ControllerParams() = default;
    explicit ControllerParams(const ControllerShape& shape);
    ControllerParams(const ControllerShape& shape, std::vector<double> flat);

    /// Entries i.i.d. uniform in [-scale, scale).
    static ControllerParams random(const ControllerShape& shape, Rng& rng, double scale = 0.1);

    const ControllerShape& shape() const noexcept { return shape_; }
    std::span<const double> flat() const noexcept { return data_; }
    std::span<double> flat() noexcept { return data_; }

    double& embedding(std::size_t token, std::size_t j) { return data_[off_emb_ + token * shape_.embed_dim + j]; }
    double embedding(std::size_t token, std::size_t j) const { return data_[off_emb_ + token * shape_.embed_dim + j]; }
    double& lstm_w(std::size_t r, std::size_t c) { return data_[off_w_ + r * shape_.embed_dim + c]; }
    double lstm_w(std::size_t r, std::size_t c) const { return data_[off_w_ + r * shape_.embed_dim + c]; }
    double& lstm_u(std::size_t r, std::size_t c) { return data_[off_u_ + r * shape_.hidden_dim + c]; }
    double lstm_u(std::size_t r, std::size_t c) const { return data_[off_u_ + r * shape_.hidden_dim + c]; }
    double& lstm_b(std::size_t r) { return data_[off_b_ + r]; }
    double lstm_b(std::size_t r) const { return data_[off_b_ + r]; }
    double& out_w(std::size_t j, std::size_t a) { return data_[off_ow_ + j * shape_.num_actions + a]; }
    double out_w(std::size_t j, std::size_t a) const { return data_[off_ow_ + j * shape_.num_actions + a]; }
    double& out_b(std::size_t a) { return data_[off_ob_ + a]; }
    double out_b(std::size_t a) const { return data_[off_ob_ + a]; }

    bool all_finite() const;

    friend bool operator==(const ControllerParams& a, const ControllerParams& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void layout();

    ControllerShape shape_;
    std::vector<double> data_;
    std::size_t off_emb_ = 0, off_w_ = 0, off_u_ = 0, off_b_ = 0, off_ow_ = 0, off_ob_ = 0;
};

/// One generated genome. inputs[t] is the token fed at step t (null token first,
/// then the previous action), which is all the backward pass needs to replay.
struct Episode {
    std::vector<std::uint32_t> actions;
    std::vector<double> log_probs;
    std::vector<std::uint32_t> inputs;
    double reward = 0.0;

    Genome genome() const { return Genome(actions); }
    double log_prob() const;
};

/// Runs the controller from the zero state, sampling one action per step.
Episode sample_genome(const ControllerParams& params, Rng& rng);

/// Teacher-forced per-step softmax distributions for the given action sequence.
std::vector<std::vector<double>> step_distributions(const ControllerParams& params,
                                                    std::span<const std::uint32_t> actions);

/// Joint log-probability of an action sequence.
double sequence_log_prob(const ControllerParams& params, std::span<const std::uint32_t> actions);

/// Gradient of sum_t gamma^t * reward * log p(a_t | s_t), t counted from 1.
ControllerParams episode_log_prob_grad(const ControllerParams& params, const Episode& episode, double gamma = 1.0);

enum class BaselineKind : std::uint8_t { None, MovingAverage };

struct ReinforceConfig {
    std::uint32_t batch_size = 8;
    double gamma = 1.0;
    double learning_rate = 1e-3;
    double reward_cap = 5.0;
    BaselineKind baseline = BaselineKind::None;
    double baseline_decay = 0.9;

    void validate() const;
    friend bool operator==(const ReinforceConfig&, const ReinforceConfig&) = default;
};

/// min(0.001/mse - 0.5, cap). mse must be positive.
double reward_from_mse(double mse, double cap = 5.0);

struct BaselineState {
    double value = 0.0;
    bool initialized = false;
    friend bool operator==(const BaselineState&, const BaselineState&) = default;
};

/// One gradient-ascent step over the batch. Throws DomainError and leaves
/// params/baseline untouched if the averaged gradient is not finite.
void reinforce_update(ControllerParams& params, std::span<const Episode> batch, const ReinforceConfig& cfg,
                      BaselineState& baseline);

/// Convenience for the baseline-free case.
ControllerParams reinforce_update(const ControllerParams& params, std::span<const Episode> batch,
                                  const ReinforceConfig& cfg);

/// The controller as owned by a search: weights plus baseline state.
struct Controller {
    ControllerParams params;
    BaselineState baseline;
    std::uint64_t updates = 0;

    Episode sample(Rng& rng) const { return sample_genome(params, rng); }
    /// Splits episodes into mini-batches of cfg.batch_size and steps once per batch.
    void train(std::span<const Episode> episodes, const ReinforceConfig& cfg);

    friend bool operator==(const Controller&, const Controller&) = default;
};

}  // namespace cellnas
