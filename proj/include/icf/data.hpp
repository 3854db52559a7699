#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace icf {

/// Bijection between opaque string ids and the contiguous range [0, size()).
/// Indices are handed out in first-appearance order.
class IdIndex {
public:
    std::size_t intern(std::string_view id);
    std::optional<std::size_t> find(std::string_view id) const;
    const std::string& id(std::size_t index) const { return ids_.at(index); }
    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }

    friend bool operator==(const IdIndex& a, const IdIndex& b) { return a.ids_ == b.ids_; }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
struct SparseEntry {
    std::size_t item;
    T value;

    friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Users x items sparse matrix with one item-sorted row per user.
/// Absent entries mean zero; stored values are never zero.
template <typename T>
struct SparseTable {
    using Entry = SparseEntry<T>;

    IdIndex users;
    IdIndex items;
    std::vector<std::vector<Entry>> rows;

    std::size_t user_count() const { return users.size(); }
    std::size_t item_count() const { return items.size(); }

    std::size_t nnz() const {
        std::size_t n = 0;
        for (const auto& row : rows) n += row.size();
        return n;
    }

    /// Stored value or zero.
    T at(std::size_t user, std::size_t item) const {
        const auto& row = rows.at(user);
        for (const auto& e : row) {
            if (e.item == item) return e.value;
            if (e.item > item) break;
        }
        return T{};
    }

    /// Empty table sharing this table's id universe.
    SparseTable empty_like() const {
        SparseTable out;
        out.users = users;
        out.items = items;
        out.rows.resize(rows.size());
        return out;
    }

    friend bool operator==(const SparseTable&, const SparseTable&) = default;
};

/// Raw watch counts.
using InteractionTable = SparseTable<std::uint64_t>;
/// Relative ratings in (0, 1].
using RatingTable = SparseTable<double>;
using RatingRow = std::span<const SparseEntry<double>>;

enum class EventFormat {
    EventPerLine,   // "user_id,item_id", one watch per line
    PreAggregated,  // "user_id,item_id,count"
};

/// Reads an event log and aggregates counts per (user, item).
///
/// Lines starting with '#' are comments and blank lines are skipped. Two
/// comment forms are directives: "#users,<id>,<id>,..." and
/// "#items,<id>,<id>,..." register ids in the given order before any data
/// line, which lets a written table be read back with its index maps intact.
/// In the pre-aggregated format a count of zero registers both ids but stores
/// nothing.
InteractionTable ingest(std::istream& in, EventFormat format);

/// Percentile of each stored count among all watchers of that item, counting
/// watchers whose count is <= the user's own (the user included).
RatingTable relative_ratings(const InteractionTable& table);

struct UserFeedback {
    Eigen::VectorXd likes;             // t, entries in {0, 1}
    Eigen::VectorXd confidences;       // c = 1 + alpha * r
    std::vector<std::size_t> observed; // sorted items with t = 1
};

/// Binarizes a rating row into likes and confidences over `item_count` items.
UserFeedback build_feedback(RatingRow ratings, double alpha, std::size_t item_count);

/// Feedback for every user of `table`, in user index order.
std::vector<UserFeedback> build_all_feedback(const RatingTable& table, double alpha);

struct SplitPair {
    RatingTable train;
    RatingTable test;
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

/// Per-user random hold-out of ceil(fraction * n_u) stored ratings.
///
/// Users with a single rating keep it in train, and at least one rating
/// always stays in train. Both outputs share the input's id universe.
SplitPair holdout_split(const RatingTable& ratings, double fraction, std::uint64_t seed);

// Text writers emit the "#users" / "#items" directives followed by one
// "user_id,item_id,value" line per stored entry in (user, item) index order.
void write_counts(std::ostream& out, const InteractionTable& table);
void write_ratings(std::ostream& out, const RatingTable& table);

/// Reads "user_id,item_id,relative_rating" lines. Values must lie in [0, 1];
/// zeros are accepted and not stored.
RatingTable read_ratings(std::istream& in);

/// Shortest decimal text that reads back to exactly `v` ('.' separator, no locale).
std::string format_real(double v);

/// JSON sidecar describing a split.
std::string split_metadata_json(const SplitPair& split);

}  // namespace icf
