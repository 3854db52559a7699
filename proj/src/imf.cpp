#include "icf/imf.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "icf/errors.hpp"
#include "icf/rng.hpp"
#include "parallel.hpp"

namespace icf {

namespace {

constexpr std::string_view kImfMagic = "IMFCF001";

using Observations = std::vector<std::vector<WeightedObservation>>;

// Per-user and per-item observation lists with confidences at `alpha`.
void build_observations(const RatingTable& train, double alpha, Observations& by_user, Observations& by_item) {
    by_user.assign(train.user_count(), {});
    by_item.assign(train.item_count(), {});
    for (std::size_t u = 0; u < train.rows.size(); ++u) {
        for (const auto& e : train.rows[u]) {
            const double c = 1.0 + alpha * e.value;
            by_user[u].push_back({e.item, c});
            by_item[e.item].push_back({u, c});
        }
    }
}

Eigen::MatrixXd gram_of(const RowMatrix& m) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m.cols(), m.cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
    return g.selfadjointView<Eigen::Lower>();
}

void sweep(RowMatrix& solved, const RowMatrix& fixed, const Observations& observations, double lambda,
           std::size_t threads) {
    const Eigen::MatrixXd gram = gram_of(fixed);
    detail::parallel_for(observations.size(), threads, [&](std::size_t k) {
        solved.row(static_cast<Eigen::Index>(k)) = solve_factor_gram(gram, fixed, observations[k], lambda).transpose();
    });
}

}  // namespace

Eigen::VectorXd solve_factor_gram(const Eigen::MatrixXd& gram, const RowMatrix& other,
                                  std::span<const WeightedObservation> observed, double lambda) {
    const Eigen::Index f = other.cols();
    Eigen::MatrixXd lhs = gram;
    lhs.diagonal().array() += lambda;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f);
    for (const auto& obs : observed) {
        const auto y = other.row(static_cast<Eigen::Index>(obs.index)).transpose();
        lhs.noalias() += (obs.confidence - 1.0) * y * y.transpose();
        rhs.noalias() += obs.confidence * y;
    }
    return lhs.ldlt().solve(rhs);
}

Eigen::VectorXd solve_factor_naive(const RowMatrix& other, const Eigen::VectorXd& confidences,
                                   const Eigen::VectorXd& preferences, double lambda) {
    const Eigen::Index f = other.cols();
    Eigen::MatrixXd lhs = lambda * Eigen::MatrixXd::Identity(f, f);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(f);
    for (Eigen::Index i = 0; i < other.rows(); ++i) {
        const auto y = other.row(i).transpose();
        lhs.noalias() += confidences[i] * y * y.transpose();
        rhs.noalias() += confidences[i] * preferences[i] * y;
    }
    return lhs.ldlt().solve(rhs);
}

double imf_objective(const ImfModel& model, const RatingTable& train, double alpha) {
    const RowMatrix& x = model.user_factors;
    const RowMatrix& y = model.item_factors;
    // Every cell as if unobserved (c = 1, t = 0), then corrections for stored cells.
    double total = gram_of(x).cwiseProduct(gram_of(y)).sum();
    for (std::size_t u = 0; u < train.rows.size(); ++u) {
        const auto xu = x.row(static_cast<Eigen::Index>(u));
        for (const auto& e : train.rows[u]) {
            const double s = xu.dot(y.row(static_cast<Eigen::Index>(e.item)));
            const double c = 1.0 + alpha * e.value;
            total += c * (1.0 - s) * (1.0 - s) - s * s;
        }
    }
    return total + model.lambda * (x.squaredNorm() + y.squaredNorm());
}

void validate(const ImfConfig& config) {
    if (!(config.alpha >= 0.0) || !std::isfinite(config.alpha)) {
        throw ValidationError("alpha must be finite and non-negative");
    }
    if (config.factors == 0) throw ValidationError("factor count must be >= 1");
    if (!(config.lambda > 0.0) || !std::isfinite(config.lambda)) {
        throw ValidationError("lambda must be positive (the normal equations are singular otherwise)");
    }
    if (config.iterations == 0) throw ValidationError("iterations must be >= 1");
}

ImfResult imf_train(const RatingTable& train, const ImfConfig& config) {
    validate(config);
    if (train.user_count() == 0 || train.item_count() == 0) throw ValidationError("imf_train: empty training table");

    const auto users = static_cast<Eigen::Index>(train.user_count());
    const auto items = static_cast<Eigen::Index>(train.item_count());
    const auto f = static_cast<Eigen::Index>(config.factors);

    ImfResult result;
    ImfModel& model = result.model;
    model.lambda = config.lambda;
    model.alpha = config.alpha;
    model.user_factors = RowMatrix::Zero(users, f);
    model.item_factors = RowMatrix::Zero(items, f);
    Rng rng(config.seed);
    for (Eigen::Index k = 0; k < model.item_factors.size(); ++k) {
        model.item_factors.data()[k] = rng.uniform(-0.01, 0.01);
    }

    Observations by_user, by_item;
    build_observations(train, config.alpha, by_user, by_item);

    result.objective_trace.push_back(imf_objective(model, train, config.alpha));
    for (std::size_t it = 0; it < config.iterations; ++it) {
        sweep(model.user_factors, model.item_factors, by_user, config.lambda, config.threads);
        result.objective_trace.push_back(imf_objective(model, train, config.alpha));
        sweep(model.item_factors, model.user_factors, by_item, config.lambda, config.threads);
        result.objective_trace.push_back(imf_objective(model, train, config.alpha));
    }
    return result;
}

Eigen::VectorXd imf_predict(const ImfModel& model, std::size_t user) {
    if (user >= model.users()) throw ContractViolation("imf_predict: user index out of range");
    return model.item_factors * model.user_factors.row(static_cast<Eigen::Index>(user)).transpose();
}

std::string save_imf(const ImfModel& model) {
    detail::ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(model.users()));
    w.put_u32(static_cast<std::uint32_t>(model.items()));
    w.put_u32(static_cast<std::uint32_t>(model.factors()));
    for (Eigen::Index k = 0; k < model.user_factors.size(); ++k) w.put_f64(model.user_factors.data()[k]);
    for (Eigen::Index k = 0; k < model.item_factors.size(); ++k) w.put_f64(model.item_factors.data()[k]);
    w.put_f64(model.lambda);
    w.put_f64(model.alpha);
    return detail::frame(kImfMagic, w.bytes());
}

ImfModel load_imf(std::string_view bytes) {
    detail::ByteReader r(detail::unframe(kImfMagic, bytes));
    const std::size_t users = r.get_u32();
    const std::size_t items = r.get_u32();
    const std::size_t f = r.get_u32();
    if (users == 0 || items == 0 || f == 0) throw FormatError("model header has a zero dimension");
    if (r.remaining() != 8 * ((users + items) * f + 2)) {
        throw FormatError("model payload size does not match its header");
    }
    ImfModel model;
    model.user_factors.resize(static_cast<Eigen::Index>(users), static_cast<Eigen::Index>(f));
    model.item_factors.resize(static_cast<Eigen::Index>(items), static_cast<Eigen::Index>(f));
    for (Eigen::Index k = 0; k < model.user_factors.size(); ++k) model.user_factors.data()[k] = r.get_f64();
    for (Eigen::Index k = 0; k < model.item_factors.size(); ++k) model.item_factors.data()[k] = r.get_f64();
    model.lambda = r.get_f64();
    model.alpha = r.get_f64();
    if (!model.user_factors.allFinite() || !model.item_factors.allFinite() || !std::isfinite(model.lambda) ||
        !std::isfinite(model.alpha)) {
        throw FormatError("model contains non-finite values");
    }
    return model;
}

}  // namespace icf
