#include "surrogate/features.hpp"

#include <cassert>

namespace surrogate {

void encode_features(const EpisodeState& state, std::span<double> out) {
  assert(out.size() == kFeatureCount);
  const auto& e = state.cumulative;
  out[0] = static_cast<double>(e.photos_viewed);
  out[1] = static_cast<double>(e.reviews_viewed);
  out[2] = static_cast<double>(e.amenities_viewed);
  out[3] = static_cast<double>(e.calendar_checked);
  out[4] = static_cast<double>(e.host_contacted);
  out[5] = static_cast<double>(e.reserve_clicked);
  out[6] = e.dwell_seconds;
  out[7] = static_cast<double>(state.view_count);

  if (state.listing) {
    const auto& l = *state.listing;
    out[8] = l.price_per_night;
    out[9] = l.review_score;
    out[10] = static_cast<double>(l.review_count);
    out[11] = static_cast<double>(l.availability_days);
    out[12] = static_cast<double>(l.past_bookings);
    out[13] = static_cast<double>(l.location_bucket);
  } else {
    for (std::size_t i = 8; i <= 13; ++i) out[i] = kMissing;
  }

  const auto& trip = state.trip;
  out[14] = trip.num_guests ? static_cast<double>(*trip.num_guests) : kMissing;
  const bool dated = trip.checkin && trip.checkout;
  out[15] = dated ? 1.0 : 0.0;
  out[16] = dated ? static_cast<double>((*trip.checkout - *trip.checkin).count()) : kMissing;
  const auto lead = lead_time_days(trip, state.window_end);
  out[17] = lead ? static_cast<double>(*lead) : kMissing;
}

FeatureVector feature_vector(const EpisodeState& state) {
  FeatureVector v(kFeatureCount);
  encode_features(state, v);
  return v;
}

}  // namespace surrogate
