#include "icf/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include "json.hpp"

#include "icf/errors.hpp"
#include "icf/rng.hpp"
#include "text_io.hpp"

namespace icf {

std::size_t IdIndex::intern(std::string_view id) {
    auto it = index_.find(std::string(id));
    if (it != index_.end()) return it->second;
    const std::size_t next = ids_.size();
    ids_.emplace_back(id);
    index_.emplace(ids_.back(), next);
    return next;
}

std::optional<std::size_t> IdIndex::find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

namespace {

// Handles "#users,..." / "#items,..." directives. Returns true if the line was
// a comment of any kind.
bool consume_comment(std::string_view line, std::size_t line_no, IdIndex& users, IdIndex& items) {
    if (line.empty() || line.front() != '#') return false;
    IdIndex* target = nullptr;
    if (line.starts_with("#users,")) target = &users;
    if (line.starts_with("#items,")) target = &items;
    if (target == nullptr) return true;
    auto fields = detail::split_fields(line);
    for (std::size_t k = 1; k < fields.size(); ++k) {
        if (fields[k].empty()) throw ParseError(line_no, "empty id in directive");
        target->intern(fields[k]);
    }
    return true;
}

template <typename T>
std::vector<std::vector<SparseEntry<T>>> to_rows(const std::vector<std::map<std::size_t, T>>& acc) {
    std::vector<std::vector<SparseEntry<T>>> rows(acc.size());
    for (std::size_t u = 0; u < acc.size(); ++u) {
        rows[u].reserve(acc[u].size());
        for (const auto& [item, value] : acc[u]) rows[u].push_back({item, value});
    }
    return rows;
}

template <typename T, typename Format>
void write_table(std::ostream& out, const SparseTable<T>& table, Format&& format) {
    out << "#users";
    for (const auto& id : table.users.ids()) out << ',' << id;
    out << "\n#items";
    for (const auto& id : table.items.ids()) out << ',' << id;
    out << '\n';
    for (std::size_t u = 0; u < table.rows.size(); ++u) {
        for (const auto& e : table.rows[u]) {
            out << table.users.id(u) << ',' << table.items.id(e.item) << ',' << format(e.value) << '\n';
        }
    }
}

}  // namespace

InteractionTable ingest(std::istream& in, EventFormat format) {
    InteractionTable table;
    std::vector<std::map<std::size_t, std::uint64_t>> acc;
    const std::size_t expected = format == EventFormat::EventPerLine ? 2 : 3;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::strip_cr(raw);
        if (line.empty()) continue;
        if (consume_comment(line, line_no, table.users, table.items)) continue;

        const auto fields = detail::split_fields(line);
        if (fields.size() != expected) {
            throw ParseError(line_no, "expected " + std::to_string(expected) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty id");

        std::uint64_t count = 1;
        if (format == EventFormat::PreAggregated) {
            const auto parsed = detail::parse_int(fields[2]);
            if (!parsed) throw ParseError(line_no, "count is not an integer");
            if (*parsed < 0) {
                throw ValidationError("line " + std::to_string(line_no) + ": negative count");
            }
            count = static_cast<std::uint64_t>(*parsed);
        }

        const std::size_t u = table.users.intern(fields[0]);
        const std::size_t i = table.items.intern(fields[1]);
        if (acc.size() < table.users.size()) acc.resize(table.users.size());
        if (count > 0) acc[u][i] += count;
    }
    acc.resize(table.users.size());
    table.rows = to_rows(acc);
    return table;
}

RatingTable relative_ratings(const InteractionTable& table) {
    if (table.user_count() == 0 || table.item_count() == 0) {
        throw ValidationError("relative_ratings: empty interaction table");
    }
    const std::size_t item_count = table.item_count();

    std::vector<std::vector<std::uint64_t>> watchers(item_count);
    for (const auto& row : table.rows) {
        for (const auto& e : row) watchers[e.item].push_back(e.value);
    }
    for (auto& counts : watchers) std::sort(counts.begin(), counts.end());

    RatingTable out;
    out.users = table.users;
    out.items = table.items;
    out.rows.resize(table.rows.size());
    for (std::size_t u = 0; u < table.rows.size(); ++u) {
        auto& dst = out.rows[u];
        dst.reserve(table.rows[u].size());
        for (const auto& e : table.rows[u]) {
            const auto& counts = watchers[e.item];
            const auto at_most = std::upper_bound(counts.begin(), counts.end(), e.value) - counts.begin();
            dst.push_back({e.item, static_cast<double>(at_most) / static_cast<double>(counts.size())});
        }
    }
    return out;
}

UserFeedback build_feedback(RatingRow ratings, double alpha, std::size_t item_count) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ValidationError("build_feedback: alpha must be a finite non-negative number");
    }
    UserFeedback fb;
    fb.likes = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(item_count));
    fb.confidences = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(item_count));
    for (const auto& e : ratings) {
        if (e.item >= item_count) throw ContractViolation("build_feedback: item index out of range");
        if (!(e.value >= 0.0 && e.value <= 1.0)) {
            throw ValidationError("build_feedback: rating outside [0, 1]");
        }
        if (e.value > 0.0) {
            const auto i = static_cast<Eigen::Index>(e.item);
            fb.likes[i] = 1.0;
            fb.confidences[i] = 1.0 + alpha * e.value;
            fb.observed.push_back(e.item);
        }
    }
    std::sort(fb.observed.begin(), fb.observed.end());
    return fb;
}

std::vector<UserFeedback> build_all_feedback(const RatingTable& table, double alpha) {
    std::vector<UserFeedback> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) out.push_back(build_feedback(row, alpha, table.item_count()));
    return out;
}

SplitPair holdout_split(const RatingTable& ratings, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ValidationError("holdout_split: fraction must lie in (0, 1)");
    }
    SplitPair split{ratings.empty_like(), ratings.empty_like(), fraction, seed};
    Rng rng(seed);

    for (std::size_t u = 0; u < ratings.rows.size(); ++u) {
        const auto& row = ratings.rows[u];
        const std::size_t n = row.size();
        if (n < 2) {
            split.train.rows[u] = row;
            continue;
        }
        // The small slack keeps products like 0.1 * 30 from rounding up past an integer.
        auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
        held = std::clamp<std::size_t>(held, 1, n - 1);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span(order));
        std::vector<bool> is_test(n, false);
        for (std::size_t k = 0; k < held; ++k) is_test[order[k]] = true;

        for (std::size_t k = 0; k < n; ++k) {
            (is_test[k] ? split.test.rows[u] : split.train.rows[u]).push_back(row[k]);
        }
    }
    return split;
}

void write_counts(std::ostream& out, const InteractionTable& table) {
    write_table(out, table, [](std::uint64_t v) { return std::to_string(v); });
}

void write_ratings(std::ostream& out, const RatingTable& table) {
    write_table(out, table, [](double v) { return detail::format_double(v); });
}

RatingTable read_ratings(std::istream& in) {
    RatingTable table;
    std::vector<std::map<std::size_t, double>> acc;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::strip_cr(raw);
        if (line.empty()) continue;
        if (consume_comment(line, line_no, table.users, table.items)) continue;

        const auto fields = detail::split_fields(line);
        if (fields.size() != 3) {
            throw ParseError(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty id");
        const auto value = detail::parse_double(fields[2]);
        if (!value) throw ParseError(line_no, "rating is not a number");
        if (!(*value >= 0.0 && *value <= 1.0)) {
            throw ValidationError("line " + std::to_string(line_no) + ": rating outside [0, 1]");
        }
        const std::size_t u = table.users.intern(fields[0]);
        const std::size_t i = table.items.intern(fields[1]);
        if (acc.size() < table.users.size()) acc.resize(table.users.size());
        if (acc[u].contains(i)) {
            throw ValidationError("line " + std::to_string(line_no) + ": duplicate (user, item) pair");
        }
        if (*value > 0.0) acc[u][i] = *value;
    }
    acc.resize(table.users.size());
    table.rows = to_rows(acc);
    return table;
}

std::string format_real(double v) { return detail::format_double(v); }

std::string split_metadata_json(const SplitPair& split) {
    nlohmann::ordered_json meta;
    meta["fraction"] = split.fraction;
    meta["seed"] = split.seed;
    meta["users"] = split.train.user_count();
    meta["items"] = split.train.item_count();
    meta["train_entries"] = split.train.nnz();
    meta["test_entries"] = split.test.nnz();
    return meta.dump(2) + "\n";
}

}  // namespace icf
