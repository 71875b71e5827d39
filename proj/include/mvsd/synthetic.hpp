#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvsd/records.hpp"

namespace mvsd {

/// Strengths of the planted routes from latent factors to labels.
struct SignalStrengths {
  double user = 12.0;   // a: user propensity (reaches the model through U)
  double genre = 1.0;   // b: genre spoiler rate (through K)
  double score = 1.0;   // c: review score (through M and the meta view)
  double text = 0.7;    // d: chance a spoiler review names plot keywords (semantic view)

  bool zero() const { return user == 0 && genre == 0 && score == 0 && text == 0; }
};

/// Parses "a,b,c" or "a,b,c,d". Given three values, the text strength keeps
/// its default unless all three are zero, in which case it is zero too.
SignalStrengths parse_signal(std::string_view text);

struct SyntheticConfig {
  std::size_t n_users = 40;
  std::size_t n_movies = 50;
  std::size_t n_reviews = 500;
  std::size_t n_genres = 4;
  std::size_t n_casts = 100;
  std::size_t keyword_pool = 40;
  std::size_t keywords_per_movie = 6;
  std::uint64_t seed = 0;
  SignalStrengths signal;
  double user_center = 0.35;  // propensity at which the user term is zero
  double noise = 0.5;         // sd of the Gaussian logit noise
  double bias = 0.0;

  void validate() const;
  /// `key=value` lines; `signal` is written as a,b,c,d.
  std::string to_text() const;
};

/// Parses to_text() output on top of the defaults; unknown keys throw.
SyntheticConfig parse_synthetic_config(std::string_view text);

/// Latent spoiler label:
///   Bernoulli(sigmoid(bias + a (logit u - logit center) + b (2 g - 1)
///                     + c (5.5 - score) / 4.5 + noise * N(0, 1)))
/// with user propensity u ~ Beta(2, 5) and g the mean latent rate of the
/// movie's genres. Spoiler reviews name three keywords from their movie's plot
/// vocabulary with probability d.
Dataset gen_synthetic(const SyntheticConfig& cfg);

/// Writes the record files plus triples.tsv into `dir` (created if needed).
void write_synthetic(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace mvsd
