#include "mvsd/records.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace mvsd {

bool is_known_role(std::string_view role) {
  return std::find(kCastRoles.begin(), kCastRoles.end(), role) != kCastRoles.end();
}

// ---- calendar ---------------------------------------------------------------

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t year_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return y + (m <= 2);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

}  // namespace

int year_of(std::int64_t unix_seconds) {
  return static_cast<int>(year_from_days(floor_div(unix_seconds, 86400)));
}

double fractional_year(std::int64_t unix_seconds) {
  const int y = year_of(unix_seconds);
  const double start = static_cast<double>(days_from_civil(y, 1, 1)) * 86400.0;
  const double end = static_cast<double>(days_from_civil(y + 1, 1, 1)) * 86400.0;
  return y + (static_cast<double>(unix_seconds) - start) / (end - start);
}

std::int64_t unix_time(int year, unsigned month, unsigned day) { return days_from_civil(year, month, day) * 86400; }

// ---- validation -------------------------------------------------------------

void validate_dataset(const Dataset& ds) {
  std::unordered_set<std::string> users, movies, people, reviews;
  for (const auto& u : ds.users) {
    if (u.user_id.empty()) throw DataError("user with empty id");
    if (!users.insert(u.user_id).second) throw DataError("duplicate user id '" + u.user_id + "'");
    if (u.badge_count < 0 || u.review_count < 0) throw DataError("user '" + u.user_id + "': negative count");
  }
  for (const auto& m : ds.movies) {
    if (m.movie_id.empty()) throw DataError("movie with empty id");
    if (!movies.insert(m.movie_id).second) throw DataError("duplicate movie id '" + m.movie_id + "'");
    if (m.genres.empty()) throw DataError("movie '" + m.movie_id + "' has no genre");
    if (!(m.rating >= 1.0 && m.rating <= 10.0)) {
      throw DataError(fmt::format("movie '{}': overall rating {} outside 1..10", m.movie_id, m.rating));
    }
    if (m.vote_count < 0 || m.runtime < 0) throw DataError("movie '" + m.movie_id + "': negative metadata");
  }
  for (const auto& c : ds.casts) {
    if (c.person_id.empty()) throw DataError("cast member with empty id");
    if (!people.insert(c.person_id).second) throw DataError("duplicate cast id '" + c.person_id + "'");
    for (const auto& cr : c.credits) {
      if (!movies.count(cr.movie_id)) {
        throw DataError("cast '" + c.person_id + "' credits unknown movie '" + cr.movie_id + "'");
      }
      if (!is_known_role(cr.role)) throw DataError("cast '" + c.person_id + "': unknown role '" + cr.role + "'");
    }
  }
  for (const auto& r : ds.reviews) {
    if (r.review_id.empty()) throw DataError("review with empty id");
    if (!reviews.insert(r.review_id).second) throw DataError("duplicate review id '" + r.review_id + "'");
    if (!movies.count(r.movie_id)) throw DataError("review '" + r.review_id + "' references unknown movie '" + r.movie_id + "'");
    if (!users.count(r.user_id)) throw DataError("review '" + r.review_id + "' references unknown user '" + r.user_id + "'");
    if (r.score < 1 || r.score > 10) {
      throw DataError(fmt::format("review '{}': score {} outside 1..10", r.review_id, r.score));
    }
    if (r.helpful_votes < 0 || r.total_votes < 0 || r.helpful_votes > r.total_votes) {
      throw DataError("review '" + r.review_id + "': helpful votes exceed total votes");
    }
  }
}

// ---- TSV --------------------------------------------------------------------

namespace {

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    switch (s[++i]) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: out += s[i];
    }
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

const char* kUserHeader =
    "#user\tuser_id:str\tcreated_at:int\tbadge_count:int\treview_count:int\tbio:str";
const char* kMovieHeader =
    "#movie\tmovie_id:str\ttitle:str\tplot:str\tyear:int\tis_adult:int\truntime:float\trating:float\t"
    "vote_count:int\tgenres:list";
const char* kCastHeader =
    "#cast\tperson_id:str\tname:str\tbio:str\tbirth_year:int\tdeath_year:int?\tmovie_count:int\tcredits:list";
const char* kReviewHeader =
    "#review\treview_id:str\tuser_id:str\tmovie_id:str\ttext:str\tscore:int\ttimestamp:int\t"
    "helpful_votes:int\ttotal_votes:int\tis_spoiler:int\tembedding_key:str";

class LineReader {
 public:
  LineReader(const std::filesystem::path& path, const char* header) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
    std::string first;
    if (!std::getline(in_, first) || first != header) {
      throw DataError(path.string() + ":1: unexpected header (expected '" + std::string(header) + "')");
    }
    line_no_ = 1;
    columns_ = split(header, '\t').size() - 1;
  }

  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (line_.empty()) continue;
      fields = split(line_, '\t');
      if (fields.size() != columns_) {
        fail(fmt::format("expected {} fields, found {}", columns_, fields.size()));
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(fmt::format("{}:{}: {}", path_.string(), line_no_, what));
  }

  template <typename T>
  T number(std::string_view field, const char* name) const {
    T value{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty()) {
      fail(fmt::format("field '{}' is not a valid number: '{}'", name, field));
    }
    return value;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::string line_;
  std::size_t line_no_ = 0;
  std::size_t columns_ = 0;
};

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::vector<std::string_view> f;
  {
    LineReader in(dir / "users.tsv", kUserHeader);
    while (in.next(f)) {
      UserRecord u;
      u.user_id = unescape(f[0]);
      u.created_at = in.number<std::int64_t>(f[1], "created_at");
      u.badge_count = in.number<int>(f[2], "badge_count");
      u.review_count = in.number<int>(f[3], "review_count");
      u.bio = unescape(f[4]);
      ds.users.push_back(std::move(u));
    }
  }
  {
    LineReader in(dir / "movies.tsv", kMovieHeader);
    while (in.next(f)) {
      MovieRecord m;
      m.movie_id = unescape(f[0]);
      m.title = unescape(f[1]);
      m.plot = unescape(f[2]);
      m.year = in.number<int>(f[3], "year");
      m.is_adult = in.number<int>(f[4], "is_adult") != 0;
      m.runtime = in.number<double>(f[5], "runtime");
      m.rating = in.number<double>(f[6], "rating");
      m.vote_count = in.number<std::int64_t>(f[7], "vote_count");
      if (!f[8].empty())
        for (auto g : split(f[8], '|')) m.genres.push_back(unescape(g));
      ds.movies.push_back(std::move(m));
    }
  }
  {
    LineReader in(dir / "casts.tsv", kCastHeader);
    while (in.next(f)) {
      CastRecord c;
      c.person_id = unescape(f[0]);
      c.name = unescape(f[1]);
      c.bio = unescape(f[2]);
      c.birth_year = in.number<int>(f[3], "birth_year");
      if (!f[4].empty()) c.death_year = in.number<int>(f[4], "death_year");
      c.movie_count = in.number<int>(f[5], "movie_count");
      if (!f[6].empty()) {
        for (auto item : split(f[6], '|')) {
          const auto colon = item.rfind(':');
          if (colon == std::string_view::npos) in.fail("credit '" + std::string(item) + "' lacks a role");
          c.credits.push_back(Credit{unescape(item.substr(0, colon)), std::string(item.substr(colon + 1))});
        }
      }
      ds.casts.push_back(std::move(c));
    }
  }
  {
    LineReader in(dir / "reviews.tsv", kReviewHeader);
    while (in.next(f)) {
      ReviewRecord r;
      r.review_id = unescape(f[0]);
      r.user_id = unescape(f[1]);
      r.movie_id = unescape(f[2]);
      r.text = unescape(f[3]);
      if (f[4].empty()) in.fail("review '" + r.review_id + "' has no score");
      r.score = in.number<int>(f[4], "score");
      r.timestamp = in.number<std::int64_t>(f[5], "timestamp");
      r.helpful_votes = in.number<int>(f[6], "helpful_votes");
      r.total_votes = in.number<int>(f[7], "total_votes");
      r.is_spoiler = in.number<int>(f[8], "is_spoiler") != 0;
      r.embedding_key = unescape(f[9]);
      ds.reviews.push_back(std::move(r));
    }
  }
  validate_dataset(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string out = std::string(kUserHeader) + "\n";
  for (const auto& u : ds.users) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", escape(u.user_id), u.created_at, u.badge_count, u.review_count,
                       escape(u.bio));
  }
  write_file(dir / "users.tsv", out);

  out = std::string(kMovieHeader) + "\n";
  for (const auto& m : ds.movies) {
    std::string genres;
    for (std::size_t i = 0; i < m.genres.size(); ++i) genres += (i ? "|" : "") + escape(m.genres[i]);
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", escape(m.movie_id), escape(m.title), escape(m.plot),
                       m.year, m.is_adult ? 1 : 0, fmt_double(m.runtime), fmt_double(m.rating), m.vote_count, genres);
  }
  write_file(dir / "movies.tsv", out);

  out = std::string(kCastHeader) + "\n";
  for (const auto& c : ds.casts) {
    std::string credits;
    for (std::size_t i = 0; i < c.credits.size(); ++i) {
      credits += (i ? "|" : "") + escape(c.credits[i].movie_id) + ":" + c.credits[i].role;
    }
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", escape(c.person_id), escape(c.name), escape(c.bio), c.birth_year,
                       c.death_year ? std::to_string(*c.death_year) : std::string(), c.movie_count, credits);
  }
  write_file(dir / "casts.tsv", out);

  out = std::string(kReviewHeader) + "\n";
  for (const auto& r : ds.reviews) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", escape(r.review_id), escape(r.user_id),
                       escape(r.movie_id), escape(r.text), r.score, r.timestamp, r.helpful_votes, r.total_votes,
                       r.is_spoiler ? 1 : 0, escape(r.embedding_key));
  }
  write_file(dir / "reviews.tsv", out);
}

std::vector<TextTriple> load_triples(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<TextTriple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      throw DataError(fmt::format("{}:{}: expected head<TAB>relation<TAB>tail", file.string(), line_no));
    }
    triples.push_back(TextTriple{unescape(f[0]), std::string(f[1]), unescape(f[2])});
  }
  return triples;
}

void save_triples(const std::vector<TextTriple>& triples, const std::filesystem::path& file) {
  std::string out;
  for (const auto& t : triples) out += escape(t.head) + "\t" + t.relation + "\t" + escape(t.tail) + "\n";
  write_file(file, out);
}

}  // namespace mvsd
