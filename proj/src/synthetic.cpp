#include "mvsd/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mvsd/graph.hpp"
#include "mvsd/kge.hpp"
#include "mvsd/rng.hpp"

namespace mvsd {

SignalStrengths parse_signal(std::string_view text) {
  std::vector<double> v;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view part = text.substr(start, comma - start);
    double x = 0;
    const auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), x);
    if (part.empty() || ec != std::errc() || end != part.data() + part.size() || !std::isfinite(x)) {
      throw std::invalid_argument("malformed signal strengths '" + std::string(text) + "'");
    }
    v.push_back(x);
    start = comma + 1;
  }
  if (v.size() != 3 && v.size() != 4) throw std::invalid_argument("--signal expects a,b,c or a,b,c,d");
  SignalStrengths s;
  s.user = v[0];
  s.genre = v[1];
  s.score = v[2];
  if (v.size() == 4) s.text = v[3];
  else if (s.user == 0 && s.genre == 0 && s.score == 0) s.text = 0;
  if (s.text < 0 || s.text > 1) throw std::invalid_argument("text signal strength must lie in [0, 1]");
  return s;
}

void SyntheticConfig::validate() const {
  if (n_users < 1 || n_movies < 1 || n_reviews < 1 || n_genres < 1) {
    throw std::invalid_argument("synthetic counts (users, movies, reviews, genres) must be at least 1");
  }
  if (keywords_per_movie < 3 || keyword_pool < keywords_per_movie) {
    throw std::invalid_argument("need at least 3 keywords per movie and a pool at least that large");
  }
  if (!(user_center > 0 && user_center < 1)) throw std::invalid_argument("user_center must lie in (0, 1)");
  if (signal.text < 0 || signal.text > 1) throw std::invalid_argument("text signal strength must lie in [0, 1]");
  if (noise < 0) throw std::invalid_argument("noise must be non-negative");
}

std::string SyntheticConfig::to_text() const {
  return fmt::format(
      "n_users={}\nn_movies={}\nn_reviews={}\nn_genres={}\nn_casts={}\nkeyword_pool={}\nkeywords_per_movie={}\n"
      "seed={}\nsignal={:.17g},{:.17g},{:.17g},{:.17g}\nuser_center={:.17g}\nnoise={:.17g}\nbias={:.17g}\n",
      n_users, n_movies, n_reviews, n_genres, n_casts, keyword_pool, keywords_per_movie, seed, signal.user,
      signal.genre, signal.score, signal.text, user_center, noise, bias);
}

SyntheticConfig parse_synthetic_config(std::string_view text) {
  SyntheticConfig cfg;
  auto count = [](std::string_view key, std::string_view v) {
    std::uint64_t x = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size()) {
      throw std::invalid_argument(fmt::format("invalid value '{}' for '{}'", v, key));
    }
    return x;
  };
  auto real = [](std::string_view key, std::string_view v) {
    double x = 0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || end != v.data() + v.size() || !std::isfinite(x)) {
      throw std::invalid_argument(fmt::format("invalid value '{}' for '{}'", v, key));
    }
    return x;
  };
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value, got '" + std::string(line) + "'");
    const std::string_view key = line.substr(0, eq);
    const std::string_view v = line.substr(eq + 1);
    if (key == "n_users") cfg.n_users = count(key, v);
    else if (key == "n_movies") cfg.n_movies = count(key, v);
    else if (key == "n_reviews") cfg.n_reviews = count(key, v);
    else if (key == "n_genres") cfg.n_genres = count(key, v);
    else if (key == "n_casts") cfg.n_casts = count(key, v);
    else if (key == "keyword_pool") cfg.keyword_pool = count(key, v);
    else if (key == "keywords_per_movie") cfg.keywords_per_movie = count(key, v);
    else if (key == "seed") cfg.seed = count(key, v);
    else if (key == "signal") cfg.signal = parse_signal(v);
    else if (key == "user_center") cfg.user_center = real(key, v);
    else if (key == "noise") cfg.noise = real(key, v);
    else if (key == "bias") cfg.bias = real(key, v);
    else throw std::invalid_argument("unknown synthetic config key '" + std::string(key) + "'");
  }
  return cfg;
}

namespace {

constexpr std::array<std::string_view, 12> kGenreNames = {"drama",   "comedy",  "thriller", "horror",
                                                          "romance", "scifi",   "action",   "fantasy",
                                                          "mystery", "western", "war",      "animation"};

constexpr std::array<std::string_view, 48> kFiller = {
    "film",   "movie",   "acting",  "great",     "boring", "story",   "characters", "music",  "scene",    "watch",
    "loved",  "hated",   "really",  "good",      "bad",    "director", "cast",      "plot",   "pacing",   "visuals",
    "script", "classic", "overall", "recommend", "fun",    "slow",    "dialogue",   "score",  "camera",   "audience",
    "time",   "first",   "second",  "half",      "best",   "worst",   "funny",      "dark",   "tone",     "effects",
    "honest", "simple",  "long",    "short",     "felt",   "enjoyed", "expected",   "again"};

constexpr std::array<std::string_view, 10> kSyllables = {"ka", "lo", "mi", "ra", "tu", "ven", "zor", "el", "qui", "dan"};

std::string keyword(std::size_t k) {
  // Three base-10 digits spelled as syllables: unique for k < 1000.
  return fmt::format("{}{}{}x", kSyllables[k / 100 % 10], kSyllables[k / 10 % 10], kSyllables[k % 10]);
}

double logit(double p) {
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return std::log(p / (1.0 - p));
}

std::int64_t uniform_time(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

Dataset gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "synthetic"));
  Dataset ds;
  const std::int64_t t_lo = unix_time(1998, 1, 1);
  const std::int64_t t_hi = unix_time(2022, 12, 31) + 86399;

  std::vector<std::string> genres;
  for (std::size_t k = 0; k < cfg.n_genres; ++k) {
    genres.push_back(k < kGenreNames.size() ? std::string(kGenreNames[k]) : fmt::format("genre{}", k));
  }
  std::vector<double> genre_rate(cfg.n_genres);
  for (double& r : genre_rate) r = rng.uniform();

  std::vector<double> propensity(cfg.n_users);
  for (std::size_t k = 0; k < cfg.n_users; ++k) {
    UserRecord u;
    u.user_id = fmt::format("u{}", k);
    u.created_at = uniform_time(rng, t_lo, t_hi);
    u.badge_count = static_cast<int>(rng.uniform_index(21));
    u.bio = fmt::format("handle{}", k);
    propensity[k] = rng.beta(2.0, 5.0);
    ds.users.push_back(std::move(u));
  }

  std::vector<double> movie_genre_rate(cfg.n_movies);
  std::vector<std::vector<std::size_t>> plot_words(cfg.n_movies);
  std::vector<std::size_t> pool(cfg.keyword_pool);
  for (std::size_t k = 0; k < cfg.n_movies; ++k) {
    MovieRecord m;
    m.movie_id = fmt::format("m{}", k);
    m.title = fmt::format("Movie {}", k);
    m.year = 1950 + static_cast<int>(rng.uniform_index(72));
    m.is_adult = rng.bernoulli(0.05);
    m.runtime = std::round(std::clamp(110.0 + 20.0 * rng.normal(), 60.0, 240.0));
    m.rating = std::round(std::clamp(6.5 + 1.5 * rng.normal(), 1.0, 10.0) * 10.0) / 10.0;
    m.vote_count = 100 + static_cast<std::int64_t>(rng.uniform_index(99901));
    std::vector<std::size_t> gidx(cfg.n_genres);
    for (std::size_t i = 0; i < gidx.size(); ++i) gidx[i] = i;
    rng.shuffle(std::span<std::size_t>(gidx));
    const std::size_t n_g = std::min<std::size_t>(cfg.n_genres, 1 + rng.uniform_index(2));
    double rate = 0;
    std::sort(gidx.begin(), gidx.begin() + static_cast<std::ptrdiff_t>(n_g));
    for (std::size_t i = 0; i < n_g; ++i) {
      m.genres.push_back(genres[gidx[i]]);
      rate += genre_rate[gidx[i]];
    }
    movie_genre_rate[k] = rate / static_cast<double>(n_g);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t i = 0; i < cfg.keywords_per_movie; ++i) {
      std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
      plot_words[k].push_back(pool[i]);
    }
    m.plot = "a story about";
    for (auto w : plot_words[k]) m.plot += " " + keyword(w);
    ds.movies.push_back(std::move(m));
  }

  for (std::size_t k = 0; k < cfg.n_casts; ++k) {
    CastRecord c;
    c.person_id = fmt::format("p{}", k);
    c.name = fmt::format("Person {}", k);
    c.birth_year = 1920 + static_cast<int>(rng.uniform_index(81));
    if (rng.bernoulli(0.15)) c.death_year = std::min(2022, c.birth_year + 40 + static_cast<int>(rng.uniform_index(51)));
    ds.casts.push_back(std::move(c));
  }
  if (!ds.casts.empty()) {
    // Two to four credits per movie; directors and actors dominate.
    constexpr std::array<double, 12> role_weight = {3, 6, 5, 2, 2, 1, 1, 0.5, 0.3, 0.5, 0.2, 0.5};
    double total_weight = 0;
    for (double w : role_weight) total_weight += w;
    for (std::size_t k = 0; k < cfg.n_movies; ++k) {
      const std::size_t n_credits = 2 + rng.uniform_index(3);
      for (std::size_t i = 0; i < n_credits; ++i) {
        auto& person = ds.casts[rng.uniform_index(ds.casts.size())];
        double x = rng.uniform() * total_weight;
        std::size_t role = 0;
        while (role + 1 < role_weight.size() && x >= role_weight[role]) x -= role_weight[role++];
        person.credits.push_back(Credit{ds.movies[k].movie_id, std::string(kCastRoles[role])});
      }
    }
    for (auto& c : ds.casts) {
      std::set<std::string> movies;
      for (const auto& cr : c.credits) movies.insert(cr.movie_id);
      c.movie_count = static_cast<int>(movies.size());
    }
  }

  const double center = logit(cfg.user_center);
  for (std::size_t k = 0; k < cfg.n_reviews; ++k) {
    ReviewRecord r;
    r.review_id = fmt::format("r{}", k);
    const std::size_t ui = rng.uniform_index(cfg.n_users);
    const std::size_t mi = rng.uniform_index(cfg.n_movies);
    r.user_id = ds.users[ui].user_id;
    r.movie_id = ds.movies[mi].movie_id;
    r.score = static_cast<int>(std::clamp(std::round(ds.movies[mi].rating + 2.0 * rng.normal()), 1.0, 10.0));
    r.timestamp = uniform_time(rng, std::max(t_lo, ds.users[ui].created_at), t_hi);
    r.total_votes = static_cast<int>(rng.uniform_index(51));
    r.helpful_votes = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(r.total_votes) + 1));
    const double z = cfg.bias + cfg.signal.user * (logit(propensity[ui]) - center) +
                     cfg.signal.genre * (2.0 * movie_genre_rate[mi] - 1.0) +
                     cfg.signal.score * (5.5 - r.score) / 4.5 + cfg.noise * rng.normal();
    r.is_spoiler = rng.uniform() < 1.0 / (1.0 + std::exp(-z));

    std::vector<std::string> words;
    const std::size_t length = 12 + rng.uniform_index(9);
    for (std::size_t i = 0; i < length; ++i) words.emplace_back(kFiller[rng.uniform_index(kFiller.size())]);
    if (r.is_spoiler && rng.bernoulli(cfg.signal.text)) {
      std::vector<std::size_t> kw = plot_words[mi];
      for (std::size_t i = 0; i < 3; ++i) {
        std::swap(kw[i], kw[i + rng.uniform_index(kw.size() - i)]);
        const std::size_t at = rng.uniform_index(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), keyword(kw[i]));
      }
    }
    for (std::size_t i = 0; i < words.size(); ++i) r.text += (i ? " " : "") + words[i];
    ++ds.users[ui].review_count;
    ds.reviews.push_back(std::move(r));
  }
  validate_dataset(ds);
  return ds;
}

void write_synthetic(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dataset(ds, dir);
  const HeteroGraph g = build_graph(ds);
  save_triples(kb_from_graph(g, ds.casts).to_text(), dir / "triples.tsv");
}

}  // namespace mvsd
