#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "icf/data.hpp"
#include "icf/nade.hpp"

namespace icf {

/// Weighted implicit matrix factorization: t_ui ~ x_u . y_i with weights
/// c_ui = 1 + alpha * r_ui.
struct ImfModel {
    RowMatrix user_factors;  // X, U x F
    RowMatrix item_factors;  // Y, M x F
    double lambda = 0.1;
    double alpha = 1.0;

    std::size_t users() const { return static_cast<std::size_t>(user_factors.rows()); }
    std::size_t items() const { return static_cast<std::size_t>(item_factors.rows()); }
    std::size_t factors() const { return static_cast<std::size_t>(item_factors.cols()); }

    friend bool operator==(const ImfModel& a, const ImfModel& b) {
        return a.user_factors == b.user_factors && a.item_factors == b.item_factors && a.lambda == b.lambda &&
               a.alpha == b.alpha;
    }
};

struct ImfConfig {
    double alpha = 1.0;
    std::size_t factors = 256;
    double lambda = 0.1;
    std::size_t iterations = 15;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct ImfResult {
    ImfModel model;
    /// Objective at initialization, then after every half-sweep (user sweep,
    /// item sweep, user sweep, ...). Length 2 * iterations + 1.
    std::vector<double> objective_trace;
};

/// One observed entry of the row being solved: the other side's index and its
/// confidence. Observed entries always have preference 1.
struct WeightedObservation {
    std::size_t index;
    double confidence;
};

/// Solves (G + sum_obs (c - 1) y yT + lambda I) x = sum_obs c y, where G is the
/// precomputed Gram matrix of `other`.
Eigen::VectorXd solve_factor_gram(const Eigen::MatrixXd& gram, const RowMatrix& other,
                                  std::span<const WeightedObservation> observed, double lambda);

/// The same normal equations assembled densely from full weight and
/// preference vectors over every row of `other`.
Eigen::VectorXd solve_factor_naive(const RowMatrix& other, const Eigen::VectorXd& confidences,
                                   const Eigen::VectorXd& preferences, double lambda);

/// Full weighted objective including the L2 penalty.
double imf_objective(const ImfModel& model, const RatingTable& train, double alpha);

void validate(const ImfConfig& config);

/// Alternating least squares. Item factors start uniform on [-0.01, 0.01]
/// (row-major draws from Rng(seed)); user factors are solved first.
ImfResult imf_train(const RatingTable& train, const ImfConfig& config);

/// Raw scores Y x_u.
Eigen::VectorXd imf_predict(const ImfModel& model, std::size_t user);

/// Binary model file, magic "IMFCF001".
std::string save_imf(const ImfModel& model);
ImfModel load_imf(std::string_view bytes);

}  // namespace icf
