#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "icf/errors.hpp"
#include "icf/imf.hpp"
#include "icf/rng.hpp"

using namespace icf;
using doctest::Approx;

namespace {

RatingTable table_from(const std::string& text) {
    std::istringstream in(text);
    return read_ratings(in);
}

RatingTable random_ratings(Rng& rng, std::size_t users, std::size_t items, double density) {
    std::string text = "#items";
    for (std::size_t i = 0; i < items; ++i) text += ",i" + std::to_string(i);
    text += "\n";
    for (std::size_t u = 0; u < users; ++u) {
        text += "u" + std::to_string(u) + ",i" + std::to_string(rng.uniform_int(items)) + ",0.5\n";
        for (std::size_t i = 0; i < items; ++i) {
            if (rng.uniform() < density) text += "u" + std::to_string(u) + ",i" + std::to_string(i) + "," + format_real(0.1 + 0.9 * rng.uniform()) + "\n";
        }
    }
    // the first line per user may collide with a later one; keep the first occurrence
    std::istringstream in(text);
    std::ostringstream dedup;
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.starts_with("#")) {
            dedup << line << "\n";
            continue;
        }
        const auto a = line.find(','), b = line.find(',', a + 1);
        if (seen.insert({line.substr(0, a), line.substr(a + 1, b - a - 1)}).second) dedup << line << "\n";
    }
    return table_from(dedup.str());
}

// Objective by summing every (user, item) cell explicitly.
double dense_objective(const ImfModel& m, const RatingTable& train, double alpha) {
    double total = 0.0;
    for (std::size_t u = 0; u < m.users(); ++u) {
        for (std::size_t i = 0; i < m.items(); ++i) {
            const double r = train.at(u, i);
            const double t = r > 0.0 ? 1.0 : 0.0;
            const double c = 1.0 + alpha * r;
            const double s = m.user_factors.row(static_cast<Eigen::Index>(u)).dot(m.item_factors.row(static_cast<Eigen::Index>(i)));
            total += c * (t - s) * (t - s);
        }
    }
    return total + m.lambda * (m.user_factors.squaredNorm() + m.item_factors.squaredNorm());
}

}  // namespace

TEST_CASE("gram-decomposed solve equals the dense weighted solve") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto items = static_cast<Eigen::Index>(1 + rng.uniform_int(8));
        const auto f = static_cast<Eigen::Index>(1 + rng.uniform_int(4));
        RowMatrix y(items, f);
        for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = rng.normal();
        Eigen::VectorXd conf = Eigen::VectorXd::Ones(items), pref = Eigen::VectorXd::Zero(items);
        std::vector<WeightedObservation> observed;
        for (Eigen::Index i = 0; i < items; ++i) {
            if (rng.uniform() < 0.5) {
                conf[i] = 1.0 + 40.0 * rng.uniform();
                pref[i] = 1.0;
                observed.push_back({static_cast<std::size_t>(i), conf[i]});
            }
        }
        const Eigen::MatrixXd gram = y.transpose() * y;
        const Eigen::VectorXd fast = solve_factor_gram(gram, y, observed, 0.1);
        const Eigen::VectorXd slow = solve_factor_naive(y, conf, pref, 0.1);
        CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("objective decomposition equals the cell-by-cell sum") {
    Rng rng(2);
    const auto train = random_ratings(rng, 6, 5, 0.3);
    const auto result = imf_train(train, {7.0, 3, 0.2, 2, 4, 1});
    CHECK(imf_objective(result.model, train, 7.0) == Approx(dense_objective(result.model, train, 7.0)).epsilon(1e-12));
}

TEST_CASE("objective never increases across half-sweeps") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto train = random_ratings(rng, 2 + rng.uniform_int(7), 2 + rng.uniform_int(7), 0.3);
        ImfConfig config{rng.uniform(0.0, 100.0), 1 + rng.uniform_int(4), 0.1, 6, rng.next_u64(), 1};
        const auto result = imf_train(train, config);
        CHECK(result.objective_trace.size() == 2 * config.iterations + 1);
        for (std::size_t k = 1; k < result.objective_trace.size(); ++k) {
            CHECK(result.objective_trace[k] <= result.objective_trace[k - 1] + 1e-9);
        }
    }
}

TEST_CASE("2 x 2 toy with one factor matches the scalar normal equations") {
    const auto train = table_from("u0,i0,1\nu1,i1,0.5\n");
    const double alpha = 2.0, lambda = 0.1;
    ImfConfig config{alpha, 1, lambda, 1, 21, 1};
    const auto result = imf_train(train, config);

    Rng init(config.seed);
    const double y0 = init.uniform(-0.01, 0.01);
    const double y1 = init.uniform(-0.01, 0.01);
    const double c00 = 1.0 + alpha * 1.0, c11 = 1.0 + alpha * 0.5;
    // user solves: x_u = sum_i c_ui t_ui y_i / (sum_i c_ui y_i^2 + lambda)
    const double x0 = c00 * y0 / (c00 * y0 * y0 + y1 * y1 + lambda);
    const double x1 = c11 * y1 / (y0 * y0 + c11 * y1 * y1 + lambda);
    // item solves with the new user factors
    const double ny0 = c00 * x0 / (c00 * x0 * x0 + x1 * x1 + lambda);
    const double ny1 = c11 * x1 / (x0 * x0 + c11 * x1 * x1 + lambda);

    CHECK(result.model.user_factors(0, 0) == Approx(x0).epsilon(1e-12));
    CHECK(result.model.user_factors(1, 0) == Approx(x1).epsilon(1e-12));
    CHECK(result.model.item_factors(0, 0) == Approx(ny0).epsilon(1e-12));
    CHECK(result.model.item_factors(1, 0) == Approx(ny1).epsilon(1e-12));
}

TEST_CASE("an unwatched item with alpha 0 gets a zero factor") {
    const auto train = table_from("#items,a,b,c\nu0,a,1\nu1,b,0.5\nu1,a,0.5\n");
    const auto result = imf_train(train, {0.0, 3, 0.1, 3, 1, 1});
    CHECK(result.model.item_factors.row(2).isZero(0.0));
}

TEST_CASE("imf_train is deterministic and thread-count independent") {
    Rng rng(4);
    const auto train = random_ratings(rng, 30, 12, 0.2);
    const auto a = imf_train(train, {10.0, 4, 0.1, 4, 9, 1});
    const auto b = imf_train(train, {10.0, 4, 0.1, 4, 9, 1});
    const auto c = imf_train(train, {10.0, 4, 0.1, 4, 9, 3});
    CHECK(a.model == b.model);
    CHECK(a.model == c.model);
    CHECK(a.objective_trace == c.objective_trace);
}

TEST_CASE("imf_train rejects bad hyperparameters") {
    const auto train = table_from("u0,i0,1\n");
    CHECK_THROWS_AS(imf_train(train, {1.0, 2, 0.0, 1, 0, 1}), ValidationError);
    CHECK_THROWS_AS(imf_train(train, {1.0, 0, 0.1, 1, 0, 1}), ValidationError);
    CHECK_THROWS_AS(imf_train(train, {1.0, 2, 0.1, 0, 0, 1}), ValidationError);
    CHECK_THROWS_AS(imf_train(train, {-1.0, 2, 0.1, 1, 0, 1}), ValidationError);
}

TEST_CASE("imf_predict") {
    ImfModel m;
    m.user_factors = RowMatrix::Zero(2, 1);
    m.item_factors = RowMatrix(2, 1);
    m.item_factors << 1.0, -1.0;
    CHECK(imf_predict(m, 0).isZero(0.0));
    m.user_factors(1, 0) = 2.0;
    CHECK(imf_predict(m, 1) == Eigen::Vector2d(2.0, -2.0));
    CHECK_THROWS_AS(imf_predict(m, 2), ContractViolation);

    Rng rng(5);
    const auto train = random_ratings(rng, 5, 9, 0.3);
    auto model = imf_train(train, {5.0, 3, 0.1, 2, 0, 1}).model;
    const Eigen::VectorXd before = imf_predict(model, 0);
    model.user_factors.row(0) *= 3.7;
    const Eigen::VectorXd after = imf_predict(model, 0);
    std::vector<std::size_t> a(9), b(9);
    std::iota(a.begin(), a.end(), std::size_t{0});
    std::iota(b.begin(), b.end(), std::size_t{0});
    std::stable_sort(a.begin(), a.end(), [&](auto x, auto y) { return before[static_cast<Eigen::Index>(x)] > before[static_cast<Eigen::Index>(y)]; });
    std::stable_sort(b.begin(), b.end(), [&](auto x, auto y) { return after[static_cast<Eigen::Index>(x)] > after[static_cast<Eigen::Index>(y)]; });
    CHECK(a == b);
}

TEST_CASE("IMF model file") {
    Rng rng(6);
    const auto train = random_ratings(rng, 4, 6, 0.4);
    const auto model = imf_train(train, {30.0, 3, 0.25, 2, 8, 1}).model;
    const std::string bytes = save_imf(model);
    CHECK(bytes.substr(0, 8) == "IMFCF001");
    CHECK(load_imf(bytes) == model);
    CHECK_THROWS_AS(load_imf(bytes.substr(0, bytes.size() - 1)), FormatError);
    std::string flipped = bytes;
    flipped[30] ^= 0x01;
    CHECK_THROWS_AS(load_imf(flipped), FormatError);
    CHECK_THROWS_AS(load_imf(save_model(init_model(2, 2, Activation::Tanh, 0, 0.1))), FormatError);
}
