#include "icf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "icf/errors.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "text_io.hpp"

namespace icf {

std::vector<double> all_percentiles(std::span<const double> scores) {
    const std::size_t n = scores.size();
    if (n < 2) throw ContractViolation("percentile ranks need at least 2 candidates");
    for (double s : scores) {
        if (std::isnan(s)) throw ContractViolation("percentile ranks: NaN score");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<double> out(n);
    const double denom = static_cast<double>(n - 1);
    for (std::size_t start = 0; start < n;) {
        std::size_t stop = start + 1;
        while (stop < n && scores[order[stop]] == scores[order[start]]) ++stop;
        const double mean_position = 0.5 * static_cast<double>(start + stop - 1);
        for (std::size_t k = start; k < stop; ++k) out[order[k]] = 100.0 * mean_position / denom;
        start = stop;
    }
    return out;
}

std::unordered_map<std::size_t, double> percentile_ranks(std::span<const double> scores,
                                                         std::span<const std::size_t> targets) {
    for (std::size_t t : targets) {
        if (t >= scores.size()) throw ContractViolation("percentile ranks: target not among candidates");
    }
    const auto all = all_percentiles(scores);
    std::unordered_map<std::size_t, double> out;
    for (std::size_t t : targets) out[t] = all[t];
    return out;
}

namespace {

struct UserOutcome {
    std::vector<RankRecord> records;
    bool skipped = false;
};

UserOutcome evaluate_user(const Scorer& scorer, const SplitPair& split, double alpha, const EvalOptions& options,
                          std::size_t user) {
    UserOutcome outcome;
    const auto& held = split.test.rows[user];
    if (held.empty()) return outcome;

    const std::size_t items = split.train.item_count();
    const UserFeedback feedback = build_feedback(split.train.rows[user], alpha, items);
    const Eigen::VectorXd scores = scorer(user, feedback);
    if (static_cast<std::size_t>(scores.size()) != items) {
        throw ContractViolation("scorer returned the wrong number of scores");
    }

    // candidate position of each item, or npos when excluded
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> position(items, npos);
    std::vector<double> candidate_scores;
    candidate_scores.reserve(items);
    std::size_t next_observed = 0;
    for (std::size_t i = 0; i < items; ++i) {
        const bool observed = next_observed < feedback.observed.size() && feedback.observed[next_observed] == i;
        if (observed) ++next_observed;
        if (observed && !options.include_train_items) continue;
        position[i] = candidate_scores.size();
        candidate_scores.push_back(scores[static_cast<Eigen::Index>(i)]);
    }
    if (candidate_scores.size() < 2) {
        outcome.skipped = true;
        return outcome;
    }

    const auto percentiles = all_percentiles(candidate_scores);
    for (const auto& e : held) {
        if (position[e.item] == npos) throw ContractViolation("held-out item is also in the training row");
        outcome.records.push_back({user, e.item, percentiles[position[e.item]], e.value});
    }
    return outcome;
}

}  // namespace

RankResult mpr(const Scorer& scorer, const SplitPair& split, double alpha, const EvalOptions& options) {
    if (split.test.nnz() == 0) throw ValidationError("mpr: test set is empty");
    if (!(split.train.items == split.test.items) || split.train.rows.size() != split.test.rows.size()) {
        throw ValidationError("mpr: train and test tables do not share an id universe");
    }
    std::vector<UserOutcome> outcomes(split.test.rows.size());
    detail::parallel_for(outcomes.size(), options.threads, [&](std::size_t u) {
        outcomes[u] = evaluate_user(scorer, split, alpha, options, u);
    });

    RankResult result;
    double weighted = 0.0;
    double weights = 0.0;
    for (const auto& outcome : outcomes) {
        if (outcome.skipped) ++result.n_skipped;
        if (outcome.records.empty()) continue;
        ++result.n_users;
        for (const auto& r : outcome.records) {
            weighted += r.weight * r.percentile;
            weights += r.weight;
            result.records.push_back(r);
        }
    }
    result.n_pairs = result.records.size();
    result.mpr = weights > 0.0 ? weighted / weights : 0.0;
    return result;
}

void write_report(std::ostream& out, const RankResult& result, const RatingTable& ids) {
    out << "user_id,item_id,percentile_rank,weight\n";
    for (const auto& r : result.records) {
        out << ids.users.id(r.user) << ',' << ids.items.id(r.item) << ',' << detail::format_double(r.percentile)
            << ',' << detail::format_double(r.weight) << '\n';
    }
    out << "MPR," << detail::format_double(result.mpr) << '\n';
}

std::string summary_json(const RankResult& result) {
    nlohmann::ordered_json j;
    j["mpr"] = result.mpr;
    j["n_users"] = result.n_users;
    j["n_pairs"] = result.n_pairs;
    j["n_skipped"] = result.n_skipped;
    return j.dump(2) + "\n";
}

}  // namespace icf
