#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "icf/data.hpp"

namespace icf {

/// Percentile of every candidate: sorted by score descending, position p of
/// N maps to 100 p / (N - 1), and tied scores share the mean percentile of
/// their block. Requires N >= 2 and no NaN scores.
std::vector<double> all_percentiles(std::span<const double> scores);

/// Percentiles for the candidate positions listed in `targets`.
std::unordered_map<std::size_t, double> percentile_ranks(std::span<const double> scores,
                                                         std::span<const std::size_t> targets);

/// Produces a score for every item given a user index and that user's
/// training feedback. Must be safe to call concurrently when threads > 1.
using Scorer = std::function<Eigen::VectorXd(std::size_t user, const UserFeedback& feedback)>;

struct RankRecord {
    std::size_t user;
    std::size_t item;
    double percentile;
    double weight;
};

struct RankResult {
    std::vector<RankRecord> records;  // (user, item) ascending
    double mpr = 0.0;
    std::size_t n_users = 0;    // users that contributed at least one record
    std::size_t n_pairs = 0;
    std::size_t n_skipped = 0;  // users with held-out items but fewer than 2 candidates
};

struct EvalOptions {
    /// Rank against every item instead of only the items absent from the
    /// user's training row.
    bool include_train_items = false;
    std::size_t threads = 1;
};

/// Weighted mean percentile rank of held-out items, weights = held-out ratings.
RankResult mpr(const Scorer& scorer, const SplitPair& split, double alpha, const EvalOptions& options = {});

/// "user_id,item_id,percentile_rank,weight" header, one line per record, then "MPR,<value>".
void write_report(std::ostream& out, const RankResult& result, const RatingTable& ids);

/// {"mpr", "n_users", "n_pairs", "n_skipped"}.
std::string summary_json(const RankResult& result);

}  // namespace icf
