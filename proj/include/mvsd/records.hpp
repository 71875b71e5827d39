#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mvsd {

/// Input validation failure (bad file, bad value, dangling reference).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReviewRecord {
  std::string review_id;
  std::string user_id;
  std::string movie_id;
  std::string text;
  int score = 0;                 // 1..10
  std::int64_t timestamp = 0;    // unix seconds
  int helpful_votes = 0;
  int total_votes = 0;
  bool is_spoiler = false;
  std::string embedding_key;     // optional precomputed-embedding id
};

struct UserRecord {
  std::string user_id;
  std::int64_t created_at = 0;   // unix seconds
  int badge_count = 0;
  int review_count = 0;
  std::string bio;
};

struct MovieRecord {
  std::string movie_id;
  std::string title;
  std::string plot;
  int year = 0;
  bool is_adult = false;
  double runtime = 0.0;          // minutes
  double rating = 0.0;           // overall rating, decimal
  std::int64_t vote_count = 0;
  std::vector<std::string> genres;
};

struct Credit {
  std::string movie_id;
  std::string role;              // one of kCastRoles
};

struct CastRecord {
  std::string person_id;
  std::string name;
  std::string bio;
  int birth_year = 0;
  std::optional<int> death_year;
  int movie_count = 0;
  std::vector<Credit> credits;
};

struct TextTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

struct Dataset {
  std::vector<UserRecord> users;
  std::vector<MovieRecord> movies;
  std::vector<CastRecord> casts;
  std::vector<ReviewRecord> reviews;
};

/// Cast role labels; the knowledge-base relation for role `x` is `is_x_of`.
inline constexpr std::array<std::string_view, 12> kCastRoles = {
    "director", "actor",  "actress",        "producer",         "writer",       "editor",
    "composer", "production_designer", "archive_footage", "cinematographer", "archive_sound", "self"};

bool is_known_role(std::string_view role);

/// Calendar year (UTC) of a unix timestamp.
int year_of(std::int64_t unix_seconds);
/// Calendar year plus the elapsed fraction of that year.
double fractional_year(std::int64_t unix_seconds);
/// Unix timestamp of midnight UTC on the given date.
std::int64_t unix_time(int year, unsigned month, unsigned day);

/// Checks value bounds and referential integrity; throws DataError naming the
/// offending record.
void validate_dataset(const Dataset& ds);

/// Reads users.tsv, movies.tsv, casts.tsv, reviews.tsv from `dir`. Loading is
/// all-or-nothing: any malformed line or dangling id throws DataError.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// `head<TAB>relation<TAB>tail` per line.
std::vector<TextTriple> load_triples(const std::filesystem::path& file);
void save_triples(const std::vector<TextTriple>& triples, const std::filesystem::path& file);

}  // namespace mvsd
