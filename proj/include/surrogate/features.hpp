#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "surrogate/types.hpp"

namespace surrogate {

using FeatureVector = std::vector<double>;

// Slot order is part of the model file contract: append new slots at the end,
// never reorder.
inline constexpr std::array<std::string_view, 18> kFeatureNames = {
    "photos_viewed",     "reviews_viewed",   "amenities_viewed", "calendar_checked",
    "host_contacted",    "reserve_clicked",  "dwell_seconds",    "view_count",
    "price_per_night",   "review_score",     "review_count",     "availability_days",
    "past_bookings",     "location_bucket",  "num_guests",       "trip_dates_present",
    "stay_nights",       "lead_time_days",
};

inline constexpr std::size_t kFeatureCount = kFeatureNames.size();

// Missing values (no listing row, no trip dates, no guest count) encode as -1.
inline constexpr double kMissing = -1.0;

void encode_features(const EpisodeState& state, std::span<double> out);

FeatureVector feature_vector(const EpisodeState& state);

}  // namespace surrogate
