#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include <Eigen/Dense>

#include "icf/data.hpp"
#include "icf/nade.hpp"

namespace icf {

struct SynthConfig {
    std::size_t users = 200;
    std::size_t items = 100;
    std::size_t factors = 4;
    double density = 0.1;  // expected fraction of items each user watches
    std::uint64_t seed = 0;
};

/// Planted latent-factor watch data.
struct SynthData {
    RowMatrix user_factors;      // U x F, standard normal
    RowMatrix item_factors;      // M x F, standard normal
    Eigen::VectorXd popularity;  // per-item offset, normal with sd 0.5
    Eigen::VectorXd episodes;    // per-item count multiplier (1 for "movies")
    InteractionTable counts;     // users "u<k>", items "i<k>"

    /// x_u . y_i / sqrt(F) + popularity_i
    double affinity(std::size_t user, std::size_t item) const;
};

/// Draw order from Rng(seed): user factors, item factors, popularity and
/// episode counts (per item), then per user: the watched-item count
/// (Poisson with mean density * M, clamped to [1, M]), a Gumbel key per item
/// (the top keys of 2 * affinity + Gumbel noise are the watched items), and a
/// watch count 1 + Poisson(episodes * exp(min(affinity, 3)) / 2) per watched
/// item in ascending item order. density = 0 yields no data at all.
SynthData synthesize(const SynthConfig& config);

/// Pre-aggregated "user_id,item_id,count" lines only (no directives).
void write_event_log(std::ostream& out, const InteractionTable& counts);

}  // namespace icf
