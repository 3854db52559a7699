#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "icf/data.hpp"
#include "icf/rng.hpp"

namespace icf {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint32_t { Tanh = 0, Identity = 1 };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Parameter bundle of the implicit autoregressive model. Also used as the
/// gradient container, so every field has the model's shape.
struct NadeParameters {
    Eigen::MatrixXd like;     // W, H x M, input weights of liked items
    Eigen::MatrixXd dislike;  // A, H x M, input weights of unliked items
    RowMatrix output;         // V, M x H
    Eigen::VectorXd hidden_bias;  // b, H
    Eigen::VectorXd output_bias;  // d, M

    static NadeParameters zeros(std::size_t items, std::size_t hidden);

    std::size_t items() const { return static_cast<std::size_t>(output_bias.size()); }
    std::size_t hidden() const { return static_cast<std::size_t>(hidden_bias.size()); }

    bool shape_matches(const NadeParameters& other) const;
    bool all_finite() const;

    friend bool operator==(const NadeParameters& a, const NadeParameters& b);
};

struct NadeModel {
    NadeParameters params;
    Activation activation = Activation::Tanh;

    std::size_t items() const { return params.items(); }
    std::size_t hidden() const { return params.hidden(); }

    friend bool operator==(const NadeModel& a, const NadeModel& b) {
        return a.activation == b.activation && a.params == b.params;
    }
};

/// An item permutation plus the 1-based split point: perm[0, split-1) is the
/// conditioning prefix and perm[split-1, M) are the targets.
struct Ordering {
    std::vector<std::size_t> perm;
    std::size_t split = 1;

    std::span<const std::size_t> prefix() const { return std::span(perm).first(split - 1); }
    std::span<const std::size_t> targets() const { return std::span(perm).subspan(split - 1); }
};

struct LossGrad {
    double value = 0.0;
    NadeParameters grads;
};

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 200;
    double weight_decay = 0.01;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
    double init_scale = 0.01;
};

struct TrainResult {
    NadeModel model;
    std::vector<double> loss_trace;  // mean ordered loss per epoch
};

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon].
inline constexpr double kProbEpsilon = 1e-12;

/// W, A and V are filled (in that order, each in storage order) with
/// uniform draws on [-init_scale, init_scale]; biases start at zero.
NadeModel init_model(std::size_t items, std::size_t hidden, Activation activation, std::uint64_t seed,
                     double init_scale);

/// b + sum over `items` of c_j * (t_j ? W[:, j] : A[:, j]).
Eigen::VectorXd preactivation(const NadeModel& model, const UserFeedback& feedback,
                              std::span<const std::size_t> items);

Eigen::VectorXd activate(Activation activation, const Eigen::VectorXd& a);

/// Hidden state conditioned on the ordering's prefix.
Eigen::VectorXd hidden_prefix(const NadeModel& model, const UserFeedback& feedback,
                              const Ordering& ordering);

/// Clamped sigmoid(d_i + V[i, :] h).
double conditional(const NadeModel& model, const Eigen::VectorXd& h, std::size_t item);

/// Hidden state with every item as input: g(b + W (t.c) + A ((1 - t).c)).
Eigen::VectorXd hidden_full(const NadeModel& model, const UserFeedback& feedback);

/// p(t_i = 1 | t, c) for every item.
Eigen::VectorXd predict_all(const NadeModel& model, const UserFeedback& feedback);

/// Loss of the target part given the prefix, scaled by M / (M - split + 1),
/// with its exact gradient. Weight decay is not included.
LossGrad ordered_loss_grad(const NadeModel& model, const UserFeedback& feedback, const Ordering& ordering);

/// Adds `weight` times the ordered-loss gradient into `grads` and returns the
/// (unweighted) loss. Only touches the prefix columns of W/A and the target
/// rows of V and d.
double accumulate_loss_grad(const NadeModel& model, const UserFeedback& feedback, const Ordering& ordering,
                            NadeParameters& grads, double weight);

/// Chain-rule weighted NLL over all items in `perm` order.
double full_nll(const NadeModel& model, const UserFeedback& feedback, std::span<const std::size_t> perm);

/// Fisher-Yates permutation of [0, items) followed by split = 1 + uniform_int(items).
Ordering sample_ordering(std::size_t items, Rng& rng);

/// Minibatch SGD on the ordered loss with L2 decay on W, A and V.
///
/// Draw order from Rng(config.seed): per epoch one shuffle of the user
/// indices, then one sample_ordering per user in visiting order.
TrainResult train(NadeModel model, std::span<const UserFeedback> data, const TrainConfig& config);

void validate(const TrainConfig& config);

/// Binary model file, magic "NADECF01".
std::string save_model(const NadeModel& model);
NadeModel load_model(std::string_view bytes);

}  // namespace icf
