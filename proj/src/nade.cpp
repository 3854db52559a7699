#include "icf/nade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "icf/errors.hpp"

namespace icf {

namespace {

constexpr std::string_view kNadeMagic = "NADECF01";

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Derivative of the activation, expressed through the activated value.
Eigen::VectorXd activation_slope(Activation activation, const Eigen::VectorXd& h) {
    if (activation == Activation::Identity) return Eigen::VectorXd::Ones(h.size());
    return (1.0 - h.array().square()).matrix();
}

void check_feedback(const NadeModel& model, const UserFeedback& feedback) {
    const auto m = static_cast<Eigen::Index>(model.items());
    if (feedback.likes.size() != m || feedback.confidences.size() != m) {
        throw ContractViolation("feedback dimension does not match model item count");
    }
}

void check_ordering(const NadeModel& model, const Ordering& ordering) {
    const std::size_t m = model.items();
    if (ordering.perm.size() != m) throw ContractViolation("ordering length does not match item count");
    if (ordering.split < 1 || ordering.split > m) throw ContractViolation("ordering split out of range");
    std::vector<bool> seen(m, false);
    for (std::size_t j : ordering.perm) {
        if (j >= m || seen[j]) throw ContractViolation("ordering is not a permutation");
        seen[j] = true;
    }
}

// Per-item weighted log-loss -c log p(t | .) and its slope w.r.t. the logit.
struct ItemLoss {
    double value;
    double logit_slope;
};

ItemLoss item_loss(double logit, double like, double confidence) {
    const double raw = sigmoid(logit);
    const double p = std::clamp(raw, kProbEpsilon, 1.0 - kProbEpsilon);
    const bool liked = like > 0.5;
    const double value = -confidence * std::log(liked ? p : 1.0 - p);
    // Inside the clamped region the loss is flat in the logit.
    const double slope = raw == p ? confidence * (p - like) : 0.0;
    return {value, slope};
}

}  // namespace

std::string_view to_string(Activation a) {
    return a == Activation::Tanh ? "tanh" : "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

NadeParameters NadeParameters::zeros(std::size_t items, std::size_t hidden) {
    const auto m = static_cast<Eigen::Index>(items);
    const auto h = static_cast<Eigen::Index>(hidden);
    return {Eigen::MatrixXd::Zero(h, m), Eigen::MatrixXd::Zero(h, m), RowMatrix::Zero(m, h),
            Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(m)};
}

bool NadeParameters::shape_matches(const NadeParameters& o) const {
    return like.rows() == o.like.rows() && like.cols() == o.like.cols() &&
           dislike.rows() == o.dislike.rows() && dislike.cols() == o.dislike.cols() &&
           output.rows() == o.output.rows() && output.cols() == o.output.cols() &&
           hidden_bias.size() == o.hidden_bias.size() && output_bias.size() == o.output_bias.size();
}

bool NadeParameters::all_finite() const {
    return like.allFinite() && dislike.allFinite() && output.allFinite() && hidden_bias.allFinite() &&
           output_bias.allFinite();
}

bool operator==(const NadeParameters& a, const NadeParameters& b) {
    return a.shape_matches(b) && a.like == b.like && a.dislike == b.dislike && a.output == b.output &&
           a.hidden_bias == b.hidden_bias && a.output_bias == b.output_bias;
}

NadeModel init_model(std::size_t items, std::size_t hidden, Activation activation, std::uint64_t seed,
                     double init_scale) {
    if (items == 0 || hidden == 0) throw ValidationError("init_model: item count and hidden width must be >= 1");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) {
        throw ValidationError("init_model: init_scale must be finite and non-negative");
    }
    NadeModel model{NadeParameters::zeros(items, hidden), activation};
    Rng rng(seed);
    auto fill = [&](auto& matrix) {
        for (Eigen::Index k = 0; k < matrix.size(); ++k) {
            matrix.data()[k] = init_scale * (2.0 * rng.uniform() - 1.0);
        }
    };
    fill(model.params.like);
    fill(model.params.dislike);
    fill(model.params.output);
    return model;
}

Eigen::VectorXd preactivation(const NadeModel& model, const UserFeedback& feedback,
                              std::span<const std::size_t> items) {
    check_feedback(model, feedback);
    const auto& p = model.params;
    Eigen::VectorXd a = p.hidden_bias;
    for (std::size_t j : items) {
        if (j >= model.items()) throw ContractViolation("item index out of range");
        const auto col = static_cast<Eigen::Index>(j);
        const double c = feedback.confidences[col];
        if (feedback.likes[col] > 0.5) {
            a.noalias() += c * p.like.col(col);
        } else {
            a.noalias() += c * p.dislike.col(col);
        }
    }
    return a;
}

Eigen::VectorXd activate(Activation activation, const Eigen::VectorXd& a) {
    if (activation == Activation::Identity) return a;
    return a.array().tanh().matrix();
}

Eigen::VectorXd hidden_prefix(const NadeModel& model, const UserFeedback& feedback, const Ordering& ordering) {
    check_ordering(model, ordering);
    return activate(model.activation, preactivation(model, feedback, ordering.prefix()));
}

double conditional(const NadeModel& model, const Eigen::VectorXd& h, std::size_t item) {
    if (h.size() != static_cast<Eigen::Index>(model.hidden())) {
        throw ContractViolation("hidden state has the wrong width");
    }
    if (item >= model.items()) throw ContractViolation("item index out of range");
    const auto i = static_cast<Eigen::Index>(item);
    const double logit = model.params.output_bias[i] + model.params.output.row(i).dot(h);
    return std::clamp(sigmoid(logit), kProbEpsilon, 1.0 - kProbEpsilon);
}

Eigen::VectorXd hidden_full(const NadeModel& model, const UserFeedback& feedback) {
    check_feedback(model, feedback);
    const auto& p = model.params;
    const Eigen::VectorXd liked = feedback.likes.cwiseProduct(feedback.confidences);
    const Eigen::VectorXd unliked = (1.0 - feedback.likes.array()).matrix().cwiseProduct(feedback.confidences);
    const Eigen::VectorXd a = p.hidden_bias + p.like * liked + p.dislike * unliked;
    return activate(model.activation, a);
}

Eigen::VectorXd predict_all(const NadeModel& model, const UserFeedback& feedback) {
    const Eigen::VectorXd h = hidden_full(model, feedback);
    const Eigen::VectorXd logits = model.params.output_bias + model.params.output * h;
    return logits.unaryExpr([](double z) { return std::clamp(sigmoid(z), kProbEpsilon, 1.0 - kProbEpsilon); });
}

double accumulate_loss_grad(const NadeModel& model, const UserFeedback& feedback, const Ordering& ordering,
                            NadeParameters& grads, double weight) {
    check_ordering(model, ordering);
    if (!grads.shape_matches(model.params)) throw ContractViolation("gradient bundle shape mismatch");
    const auto& p = model.params;
    const auto prefix = ordering.prefix();
    const auto targets = ordering.targets();
    const double scale = static_cast<double>(model.items()) / static_cast<double>(targets.size());

    const Eigen::VectorXd h = activate(model.activation, preactivation(model, feedback, prefix));

    double loss = 0.0;
    Eigen::VectorXd hidden_grad = Eigen::VectorXd::Zero(h.size());
    for (std::size_t k : targets) {
        const auto i = static_cast<Eigen::Index>(k);
        const double logit = p.output_bias[i] + p.output.row(i).dot(h);
        const ItemLoss term = item_loss(logit, feedback.likes[i], feedback.confidences[i]);
        loss += term.value;
        const double delta = scale * term.logit_slope;
        if (delta == 0.0) continue;
        hidden_grad.noalias() += delta * p.output.row(i).transpose();
        grads.output_bias[i] += weight * delta;
        grads.output.row(i).noalias() += (weight * delta) * h.transpose();
    }
    loss *= scale;

    const Eigen::VectorXd pre_grad = hidden_grad.cwiseProduct(activation_slope(model.activation, h));
    grads.hidden_bias.noalias() += weight * pre_grad;
    for (std::size_t j : prefix) {
        const auto col = static_cast<Eigen::Index>(j);
        const double c = weight * feedback.confidences[col];
        if (feedback.likes[col] > 0.5) {
            grads.like.col(col).noalias() += c * pre_grad;
        } else {
            grads.dislike.col(col).noalias() += c * pre_grad;
        }
    }
    return loss;
}

LossGrad ordered_loss_grad(const NadeModel& model, const UserFeedback& feedback, const Ordering& ordering) {
    LossGrad out{0.0, NadeParameters::zeros(model.items(), model.hidden())};
    out.value = accumulate_loss_grad(model, feedback, ordering, out.grads, 1.0);
    return out;
}

double full_nll(const NadeModel& model, const UserFeedback& feedback, std::span<const std::size_t> perm) {
    check_feedback(model, feedback);
    Ordering check{{perm.begin(), perm.end()}, 1};
    check_ordering(model, check);
    const auto& p = model.params;

    Eigen::VectorXd a = p.hidden_bias;
    double loss = 0.0;
    for (std::size_t k : perm) {
        const auto i = static_cast<Eigen::Index>(k);
        const Eigen::VectorXd h = activate(model.activation, a);
        const double logit = p.output_bias[i] + p.output.row(i).dot(h);
        loss += item_loss(logit, feedback.likes[i], feedback.confidences[i]).value;
        const double c = feedback.confidences[i];
        if (feedback.likes[i] > 0.5) {
            a.noalias() += c * p.like.col(i);
        } else {
            a.noalias() += c * p.dislike.col(i);
        }
    }
    return loss;
}

Ordering sample_ordering(std::size_t items, Rng& rng) {
    if (items == 0) throw ContractViolation("sample_ordering: item count must be >= 1");
    Ordering ordering;
    ordering.perm.resize(items);
    std::iota(ordering.perm.begin(), ordering.perm.end(), std::size_t{0});
    rng.shuffle(std::span(ordering.perm));
    ordering.split = 1 + static_cast<std::size_t>(rng.uniform_int(items));
    return ordering;
}

void validate(const TrainConfig& config) {
    if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
        throw ValidationError("learning rate must be finite and non-negative");
    }
    if (config.batch_size == 0) throw ValidationError("batch size must be >= 1");
    if (!(config.weight_decay >= 0.0) || !std::isfinite(config.weight_decay)) {
        throw ValidationError("weight decay must be finite and non-negative");
    }
    if (config.epochs == 0) throw ValidationError("epochs must be >= 1");
    if (!(config.init_scale >= 0.0) || !std::isfinite(config.init_scale)) {
        throw ValidationError("init scale must be finite and non-negative");
    }
}

TrainResult train(NadeModel model, std::span<const UserFeedback> data, const TrainConfig& config) {
    validate(config);
    if (data.empty()) throw ValidationError("train: no training users");
    for (const auto& fb : data) check_feedback(model, fb);

    Rng rng(config.seed);
    std::vector<std::size_t> visit(data.size());
    std::iota(visit.begin(), visit.end(), std::size_t{0});
    NadeParameters grads = NadeParameters::zeros(model.items(), model.hidden());
    auto& p = model.params;

    TrainResult result;
    result.loss_trace.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span(visit));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < visit.size(); start += config.batch_size) {
            const std::size_t stop = std::min(visit.size(), start + config.batch_size);
            const double weight = 1.0 / static_cast<double>(stop - start);
            grads.like.setZero();
            grads.dislike.setZero();
            grads.output.setZero();
            grads.hidden_bias.setZero();
            grads.output_bias.setZero();
            for (std::size_t k = start; k < stop; ++k) {
                const Ordering ordering = sample_ordering(model.items(), rng);
                epoch_loss += accumulate_loss_grad(model, data[visit[k]], ordering, grads, weight);
            }
            const double lr = config.learning_rate;
            const double decay = config.weight_decay;
            p.like -= lr * (grads.like + decay * p.like);
            p.dislike -= lr * (grads.dislike + decay * p.dislike);
            p.output -= lr * (grads.output + decay * p.output);
            p.hidden_bias -= lr * grads.hidden_bias;
            p.output_bias -= lr * grads.output_bias;
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(visit.size()));
    }
    result.model = std::move(model);
    return result;
}

std::string save_model(const NadeModel& model) {
    const auto& p = model.params;
    detail::ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(model.items()));
    w.put_u32(static_cast<std::uint32_t>(model.hidden()));
    w.put_u32(static_cast<std::uint32_t>(model.activation));
    auto put_row_major = [&](const auto& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) w.put_f64(m(r, c));
        }
    };
    put_row_major(p.like);
    put_row_major(p.dislike);
    put_row_major(p.output);
    for (double v : p.hidden_bias) w.put_f64(v);
    for (double v : p.output_bias) w.put_f64(v);
    return detail::frame(kNadeMagic, w.bytes());
}

NadeModel load_model(std::string_view bytes) {
    detail::ByteReader r(detail::unframe(kNadeMagic, bytes));
    const std::size_t items = r.get_u32();
    const std::size_t hidden = r.get_u32();
    const std::uint32_t code = r.get_u32();
    if (items == 0 || hidden == 0) throw FormatError("model header has a zero dimension");
    if (code > static_cast<std::uint32_t>(Activation::Identity)) throw FormatError("unknown activation code");
    const std::size_t expected = 8 * (3 * items * hidden + items + hidden);
    if (r.remaining() != expected) throw FormatError("model payload size does not match its header");

    NadeModel model{NadeParameters::zeros(items, hidden), static_cast<Activation>(code)};
    auto& p = model.params;
    auto get_row_major = [&](auto& m) {
        for (Eigen::Index row = 0; row < m.rows(); ++row) {
            for (Eigen::Index col = 0; col < m.cols(); ++col) m(row, col) = r.get_f64();
        }
    };
    get_row_major(p.like);
    get_row_major(p.dislike);
    get_row_major(p.output);
    for (double& v : p.hidden_bias) v = r.get_f64();
    for (double& v : p.output_bias) v = r.get_f64();
    if (!p.all_finite()) throw FormatError("model contains non-finite parameters");
    return model;
}

}  // namespace icf
