#include "icf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "icf/errors.hpp"
#include "icf/rng.hpp"

namespace icf {

double SynthData::affinity(std::size_t user, std::size_t item) const {
    const auto u = static_cast<Eigen::Index>(user);
    const auto i = static_cast<Eigen::Index>(item);
    const double dot = user_factors.row(u).dot(item_factors.row(i));
    return dot / std::sqrt(static_cast<double>(item_factors.cols())) + popularity[i];
}

SynthData synthesize(const SynthConfig& config) {
    if (config.factors == 0) throw ValidationError("synth: factor count must be >= 1");
    if (!(config.density >= 0.0 && config.density <= 1.0)) throw ValidationError("synth: density must lie in [0, 1]");

    const auto users = static_cast<Eigen::Index>(config.users);
    const auto items = static_cast<Eigen::Index>(config.items);
    const auto f = static_cast<Eigen::Index>(config.factors);

    SynthData data;
    Rng rng(config.seed);
    data.user_factors.resize(users, f);
    data.item_factors.resize(items, f);
    for (Eigen::Index k = 0; k < data.user_factors.size(); ++k) data.user_factors.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < data.item_factors.size(); ++k) data.item_factors.data()[k] = rng.normal();
    data.popularity.resize(items);
    data.episodes.resize(items);
    for (Eigen::Index i = 0; i < items; ++i) {
        data.popularity[i] = 0.5 * rng.normal();
        // half the catalogue are single-video items, the rest multi-episode shows
        data.episodes[i] = rng.uniform() < 0.5 ? 1.0 : 2.0 + static_cast<double>(rng.uniform_int(11));
    }

    if (config.density == 0.0 || config.users == 0 || config.items == 0) return data;

    for (std::size_t u = 0; u < config.users; ++u) data.counts.users.intern("u" + std::to_string(u));
    data.counts.rows.resize(config.users);

    std::vector<double> keys(config.items);
    std::vector<std::size_t> order(config.items);
    const double mean_watched = config.density * static_cast<double>(config.items);
    for (std::size_t u = 0; u < config.users; ++u) {
        const auto watched = std::clamp<std::size_t>(static_cast<std::size_t>(rng.poisson(mean_watched)), 1, config.items);
        for (std::size_t i = 0; i < config.items; ++i) {
            double v = rng.uniform();
            while (v <= 0.0) v = rng.uniform();
            keys[i] = 2.0 * data.affinity(u, i) - std::log(-std::log(v));
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(watched), order.end(),
                          [&](std::size_t a, std::size_t b) { return keys[a] > keys[b] || (keys[a] == keys[b] && a < b); });
        std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(watched));

        for (std::size_t k = 0; k < watched; ++k) {
            const std::size_t i = order[k];
            const double rate = data.episodes[static_cast<Eigen::Index>(i)] * std::exp(std::min(data.affinity(u, i), 3.0)) / 2.0;
            const std::uint64_t count = 1 + rng.poisson(rate);
            data.counts.rows[u].push_back({i, count});
        }
    }
    // item ids are dense and in index order, so rows are already item-sorted
    for (std::size_t i = 0; i < config.items; ++i) data.counts.items.intern("i" + std::to_string(i));
    return data;
}

void write_event_log(std::ostream& out, const InteractionTable& counts) {
    for (std::size_t u = 0; u < counts.rows.size(); ++u) {
        for (const auto& e : counts.rows[u]) {
            out << counts.users.id(u) << ',' << counts.items.id(e.item) << ',' << e.value << '\n';
        }
    }
}

}  // namespace icf
