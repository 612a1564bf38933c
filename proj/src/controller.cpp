#include "cellnas/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellnas/errors.hpp"

namespace cellnas {

void ControllerShape::validate() const {
    if (num_actions < 1 || embed_dim < 1 || hidden_dim < 1 || steps < 1)
        throw ConfigError("controller shape dimensions must be >= 1");
}

std::size_t ControllerShape::parameter_count() const {
    const std::size_t a = num_actions, e = embed_dim, h = hidden_dim;
    return (a + 1) * e + 4 * h * e + 4 * h * h + 4 * h + h * a + a;
}

ControllerParams::ControllerParams(const ControllerShape& shape) : shape_(shape) {
    shape_.validate();
    data_.assign(shape_.parameter_count(), 0.0);
    layout();
}

ControllerParams::ControllerParams(const ControllerShape& shape, std::vector<double> flat)
    : shape_(shape), data_(std::move(flat)) {
    shape_.validate();
    if (data_.size() != shape_.parameter_count())
        throw DomainError("controller params: flat size " + std::to_string(data_.size()) + " does not match shape (" +
                          std::to_string(shape_.parameter_count()) + ")");
    layout();
}

void ControllerParams::layout() {
    const std::size_t a = shape_.num_actions, e = shape_.embed_dim, h = shape_.hidden_dim;
    off_emb_ = 0;
    off_w_ = off_emb_ + (a + 1) * e;
    off_u_ = off_w_ + 4 * h * e;
    off_b_ = off_u_ + 4 * h * h;
    off_ow_ = off_b_ + 4 * h;
    off_ob_ = off_ow_ + h * a;
}

ControllerParams ControllerParams::random(const ControllerShape& shape, Rng& rng, double scale) {
    ControllerParams p(shape);
    for (double& v : p.data_) v = rng.uniform(-scale, scale);
    return p;
}

bool ControllerParams::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Episode::log_prob() const { return std::accumulate(log_probs.begin(), log_probs.end(), 0.0); }

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Activations of one LSTM step, kept for the backward pass.
struct StepCache {
    std::uint32_t input = 0;
    std::vector<double> h_prev, c_prev;
    std::vector<double> i, f, g, o, c, h;
    std::vector<double> probs;
};

class Forward {
public:
    explicit Forward(const ControllerParams& p)
        : p_(p), h_(p.shape().hidden_dim, 0.0), c_(p.shape().hidden_dim, 0.0) {}

    /// Advances one step on `token`; returns the cache with the softmax distribution.
    StepCache step(std::uint32_t token) {
        const auto& s = p_.shape();
        const std::size_t hd = s.hidden_dim, ed = s.embed_dim;
        StepCache st;
        st.input = token;
        st.h_prev = h_;
        st.c_prev = c_;
        std::vector<double> z(4 * hd);
        for (std::size_t r = 0; r < 4 * hd; ++r) {
            double acc = p_.lstm_b(r);
            for (std::size_t j = 0; j < ed; ++j) acc += p_.lstm_w(r, j) * p_.embedding(token, j);
            for (std::size_t j = 0; j < hd; ++j) acc += p_.lstm_u(r, j) * h_[j];
            z[r] = acc;
        }
        st.i.resize(hd);
        st.f.resize(hd);
        st.g.resize(hd);
        st.o.resize(hd);
        st.c.resize(hd);
        st.h.resize(hd);
        for (std::size_t j = 0; j < hd; ++j) {
            st.i[j] = sigmoid(z[j]);
            st.f[j] = sigmoid(z[hd + j]);
            st.g[j] = std::tanh(z[2 * hd + j]);
            st.o[j] = sigmoid(z[3 * hd + j]);
            st.c[j] = st.f[j] * c_[j] + st.i[j] * st.g[j];
            st.h[j] = st.o[j] * std::tanh(st.c[j]);
        }
        h_ = st.h;
        c_ = st.c;

        const std::size_t na = s.num_actions;
        std::vector<double> logits(na);
        for (std::size_t a = 0; a < na; ++a) logits[a] = p_.out_b(a);
        for (std::size_t j = 0; j < hd; ++j) {
            const double hj = h_[j];
            for (std::size_t a = 0; a < na; ++a) logits[a] += p_.out_w(j, a) * hj;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        st.probs.resize(na);
        for (std::size_t a = 0; a < na; ++a) {
            st.probs[a] = std::exp(logits[a] - mx);
            sum += st.probs[a];
        }
        for (double& v : st.probs) v /= sum;
        log_norm_ = mx + std::log(sum);
        logits_ = std::move(logits);
        return st;
    }

    /// log softmax of the most recent step at action a.
    double log_prob(std::uint32_t a) const { return logits_[a] - log_norm_; }

private:
    const ControllerParams& p_;
    std::vector<double> h_, c_;
    std::vector<double> logits_;
    double log_norm_ = 0.0;
};

void check_actions(const ControllerParams& params, std::span<const std::uint32_t> actions) {
    if (actions.size() != params.shape().steps)
        throw DomainError("controller: episode length does not match controller steps");
    for (auto a : actions)
        if (a >= params.shape().num_actions) throw DomainError("controller: action out of range");
}

}  // namespace

Episode sample_genome(const ControllerParams& params, Rng& rng) {
    const auto& s = params.shape();
    Forward fwd(params);
    Episode ep;
    std::uint32_t token = s.num_actions;  // null
    for (std::uint32_t t = 0; t < s.steps; ++t) {
        const StepCache st = fwd.step(token);
        const auto a = static_cast<std::uint32_t>(rng.categorical(st.probs));
        ep.inputs.push_back(token);
        ep.actions.push_back(a);
        ep.log_probs.push_back(fwd.log_prob(a));
        token = a;
    }
    return ep;
}

std::vector<std::vector<double>> step_distributions(const ControllerParams& params,
                                                    std::span<const std::uint32_t> actions) {
    check_actions(params, actions);
    Forward fwd(params);
    std::vector<std::vector<double>> out;
    std::uint32_t token = params.shape().num_actions;
    for (std::uint32_t a : actions) {
        out.push_back(fwd.step(token).probs);
        token = a;
    }
    return out;
}

double sequence_log_prob(const ControllerParams& params, std::span<const std::uint32_t> actions) {
    check_actions(params, actions);
    Forward fwd(params);
    double total = 0.0;
    std::uint32_t token = params.shape().num_actions;
    for (std::uint32_t a : actions) {
        fwd.step(token);
        total += fwd.log_prob(a);
        token = a;
    }
    return total;
}

ControllerParams episode_log_prob_grad(const ControllerParams& params, const Episode& episode, double gamma) {
    check_actions(params, episode.actions);
    const auto& s = params.shape();
    const std::size_t hd = s.hidden_dim, ed = s.embed_dim, na = s.num_actions, n = s.steps;
    ControllerParams grad(s);
    if (episode.reward == 0.0) return grad;

    Forward fwd(params);
    std::vector<StepCache> steps;
    steps.reserve(n);
    std::uint32_t token = s.num_actions;
    for (std::uint32_t a : episode.actions) {
        steps.push_back(fwd.step(token));
        token = a;
    }

    std::vector<double> dh_next(hd, 0.0), dc_next(hd, 0.0), dz(4 * hd), dlogit(na);
    for (std::size_t t = n; t-- > 0;) {
        const StepCache& st = steps[t];
        const double weight = std::pow(gamma, static_cast<double>(t + 1)) * episode.reward;
        for (std::size_t a = 0; a < na; ++a) dlogit[a] = -weight * st.probs[a];
        dlogit[episode.actions[t]] += weight;

        std::vector<double> dh = dh_next;
        for (std::size_t j = 0; j < hd; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < na; ++a) {
                grad.out_w(j, a) += st.h[j] * dlogit[a];
                acc += params.out_w(j, a) * dlogit[a];
            }
            dh[j] += acc;
        }
        for (std::size_t a = 0; a < na; ++a) grad.out_b(a) += dlogit[a];

        for (std::size_t j = 0; j < hd; ++j) {
            const double tc = std::tanh(st.c[j]);
            const double d_o = dh[j] * tc;
            const double dc = dh[j] * st.o[j] * (1.0 - tc * tc) + dc_next[j];
            const double d_i = dc * st.g[j];
            const double d_g = dc * st.i[j];
            const double d_f = dc * st.c_prev[j];
            dc_next[j] = dc * st.f[j];
            dz[j] = d_i * st.i[j] * (1.0 - st.i[j]);
            dz[hd + j] = d_f * st.f[j] * (1.0 - st.f[j]);
            dz[2 * hd + j] = d_g * (1.0 - st.g[j] * st.g[j]);
            dz[3 * hd + j] = d_o * st.o[j] * (1.0 - st.o[j]);
        }

        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (std::size_t r = 0; r < 4 * hd; ++r) {
            const double d = dz[r];
            grad.lstm_b(r) += d;
            for (std::size_t j = 0; j < ed; ++j) {
                grad.lstm_w(r, j) += d * params.embedding(st.input, j);
                grad.embedding(st.input, j) += params.lstm_w(r, j) * d;
            }
            for (std::size_t j = 0; j < hd; ++j) {
                grad.lstm_u(r, j) += d * st.h_prev[j];
                dh_next[j] += params.lstm_u(r, j) * d;
            }
        }
    }
    return grad;
}

void ReinforceConfig::validate() const {
    if (batch_size < 1) throw ConfigError("rl.batch_size must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("rl.gamma must be in (0, 1]");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("rl.learning_rate must be >= 0");
    if (!(reward_cap > -0.5)) throw ConfigError("rl.reward_cap must exceed -0.5");
    if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw ConfigError("rl.baseline_decay must be in [0, 1)");
}

double reward_from_mse(double mse, double cap) {
    if (!(mse > 0.0)) throw DomainError("reward_from_mse: mse must be positive");
    return std::min(0.001 / mse - 0.5, cap);
}

void reinforce_update(ControllerParams& params, std::span<const Episode> batch, const ReinforceConfig& cfg,
                      BaselineState& baseline) {
    if (batch.empty()) throw DomainError("reinforce_update: empty batch");
    const bool use_baseline = cfg.baseline == BaselineKind::MovingAverage;
    const double b = (use_baseline && baseline.initialized) ? baseline.value : 0.0;

    std::vector<double> total(params.flat().size(), 0.0);
    double reward_sum = 0.0;
    for (const Episode& ep : batch) {
        Episode centered = ep;
        centered.reward = ep.reward - b;
        reward_sum += ep.reward;
        if (centered.reward == 0.0) continue;
        const ControllerParams g = episode_log_prob_grad(params, centered, cfg.gamma);
        const auto gf = g.flat();
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += gf[i];
    }
    const double step = cfg.learning_rate / static_cast<double>(batch.size());
    for (double& v : total) {
        v *= step;
        if (!std::isfinite(v)) throw DomainError("reinforce_update: non-finite gradient, step aborted");
    }
    auto flat = params.flat();
    for (std::size_t i = 0; i < total.size(); ++i) flat[i] += total[i];

    if (use_baseline) {
        const double mean = reward_sum / static_cast<double>(batch.size());
        baseline.value = baseline.initialized ? cfg.baseline_decay * baseline.value + (1.0 - cfg.baseline_decay) * mean
                                              : mean;
        baseline.initialized = true;
    }
}

ControllerParams reinforce_update(const ControllerParams& params, std::span<const Episode> batch,
                                  const ReinforceConfig& cfg) {
    ControllerParams next = params;
    BaselineState unused;
    ReinforceConfig plain = cfg;
    plain.baseline = BaselineKind::None;
    reinforce_update(next, batch, plain, unused);
    return next;
}

void Controller::train(std::span<const Episode> episodes, const ReinforceConfig& cfg) {
    for (std::size_t start = 0; start < episodes.size(); start += cfg.batch_size) {
        const std::size_t len = std::min<std::size_t>(cfg.batch_size, episodes.size() - start);
        reinforce_update(params, episodes.subspan(start, len), cfg, baseline);
        ++updates;
    }
}

}  // namespace cellnas
