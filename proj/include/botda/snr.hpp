#pragma once

#include <cmath>
#include <string>

namespace botda {

/// How a plateau-to-noise ratio A/sigma is expressed in dB.
///  Amplitude: 20 log10(A / sigma), i.e. the power ratio A^2 / sigma^2.
///  Ratio:     10 log10(A / sigma), the mean-over-std figure common in
///             BOTDA reports.
enum class SnrConvention { Amplitude, Ratio };

inline double snr_ratio_to_db(double ratio, SnrConvention c = SnrConvention::Amplitude) {
  return (c == SnrConvention::Amplitude ? 20.0 : 10.0) * std::log10(ratio);
}

inline double snr_db_to_ratio(double db, SnrConvention c = SnrConvention::Amplitude) {
  return std::pow(10.0, db / (c == SnrConvention::Amplitude ? 20.0 : 10.0));
}

inline std::string to_string(SnrConvention c) {
  return c == SnrConvention::Amplitude ? "20*log10(plateau/noise_rms)"
                                       : "10*log10(plateau/noise_rms)";
}

}  // namespace botda
