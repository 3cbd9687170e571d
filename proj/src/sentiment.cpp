#include "achilles/sentiment.hpp"

#include "achilles/csv.hpp"
#include "achilles/error.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace achilles {

int label_to_number(SentimentLabel label) noexcept {
  switch (label) {
  case SentimentLabel::Positive: return 1;
  case SentimentLabel::Negative: return -1;
  case SentimentLabel::Neutral: return 0;
  }
  return 0;
}

SentimentLabel parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "positive") return SentimentLabel::Positive;
  if (lower == "negative") return SentimentLabel::Negative;
  if (lower == "neutral") return SentimentLabel::Neutral;
  throw Error(ErrorKind::BadInput, fmt::format("unknown sentiment label '{}'", text));
}

std::string_view to_string(SentimentLabel label) noexcept {
  switch (label) {
  case SentimentLabel::Positive: return "Positive";
  case SentimentLabel::Negative: return "Negative";
  case SentimentLabel::Neutral: return "Neutral";
  }
  return "Neutral";
}

SentimentSnapshot aggregate(std::span<const SourceReading> readings) {
  if (readings.empty()) throw Error(ErrorKind::InvalidArgument, "cannot aggregate zero readings");
  SentimentSnapshot snap;
  snap.readings.assign(readings.begin(), readings.end());
  double prob = 0.0, sent = 0.0;
  Timestamp latest = readings.front().time;
  for (const auto& r : readings) {
    if (!(r.probability >= 0.0 && r.probability <= 1.0)) {
      throw Error(ErrorKind::BadInput,
                  fmt::format("probability {} from '{}' outside [0,1]", r.probability, r.source));
    }
    prob += r.probability;
    sent += label_to_number(r.label);
    latest = std::max(latest, r.time);
  }
  const auto n = static_cast<double>(readings.size());
  snap.avg_probability = prob / n;
  snap.avg_sentiment = sent / n;
  snap.time = latest;
  return snap;
}

SentimentSnapshot cold_start_snapshot(Timestamp time) {
  SentimentSnapshot snap;
  snap.time = time;
  snap.cold_start = true;
  return snap;
}

SentimentSnapshot snapshot_at(const SentimentProvider& provider, Timestamp time) {
  auto readings = provider.read(time);
  if (readings.empty()) return cold_start_snapshot(time);
  return aggregate(readings);
}

FileSentimentProvider::FileSentimentProvider(std::vector<SourceReading> feed) : feed_(std::move(feed)) {
  std::stable_sort(feed_.begin(), feed_.end(),
                   [](const SourceReading& a, const SourceReading& b) { return a.time < b.time; });
  for (const auto& r : feed_) {
    if (!(r.probability >= 0.0 && r.probability <= 1.0)) {
      throw Error(ErrorKind::BadInput, fmt::format("probability {} outside [0,1]", r.probability));
    }
    if (std::find(sources_.begin(), sources_.end(), r.source) == sources_.end()) {
      sources_.push_back(r.source);
    }
  }
}

FileSentimentProvider FileSentimentProvider::load(std::istream& source) {
  std::string line;
  if (!csv::next_line(source, line)) throw Error(ErrorKind::BadInput, "sentiment feed is missing its header");
  auto header = csv::split(line);
  if (header.size() != 4 || header[0] != "Time" || header[1] != "Source" ||
      header[2] != "Probability" || header[3] != "Label") {
    throw Error(ErrorKind::BadInput, fmt::format("unexpected sentiment feed header '{}'", line));
  }
  std::vector<SourceReading> feed;
  while (csv::next_line(source, line)) {
    auto f = csv::split(line);
    if (f.size() != 4 || f[1].empty()) {
      throw Error(ErrorKind::BadInput, fmt::format("malformed sentiment row '{}'", line));
    }
    feed.push_back({std::string(f[1]), Timestamp::parse(f[0]), csv::parse_double(f[2], "Probability"),
                    parse_label(f[3])});
  }
  return FileSentimentProvider(std::move(feed));
}

std::vector<SourceReading> FileSentimentProvider::read(Timestamp time) const {
  std::vector<SourceReading> out;
  for (const auto& src : sources_) {
    const SourceReading* latest = nullptr;
    for (const auto& r : feed_) {
      if (r.time > time) break;
      if (r.source == src) latest = &r;
    }
    if (latest) out.push_back(*latest);
  }
  return out;
}

void write_sentiment_feed(std::ostream& sink, std::span<const SourceReading> feed) {
  sink << "Time,Source,Probability,Label\n";
  for (const auto& r : feed) {
    sink << r.time.to_string() << ',' << r.source << ',' << csv::exact(r.probability) << ','
         << to_string(r.label) << '\n';
  }
  if (!sink) throw Error(ErrorKind::Io, "failed writing sentiment feed");
}

LexiconSentimentProvider::LexiconSentimentProvider(std::vector<Headline> headlines,
                                                   std::vector<std::string> positive,
                                                   std::vector<std::string> negative)
    : headlines_(std::move(headlines)), positive_(std::move(positive)), negative_(std::move(negative)) {
  std::stable_sort(headlines_.begin(), headlines_.end(),
                   [](const Headline& a, const Headline& b) { return a.time < b.time; });
  std::sort(positive_.begin(), positive_.end());
  std::sort(negative_.begin(), negative_.end());
}

LexiconSentimentProvider LexiconSentimentProvider::load(std::istream& source) {
  std::string line;
  if (!csv::next_line(source, line)) throw Error(ErrorKind::BadInput, "headline feed is missing its header");
  std::vector<Headline> out;
  while (csv::next_line(source, line)) {
    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw Error(ErrorKind::BadInput, fmt::format("malformed headline row '{}'", line));
    out.push_back({Timestamp::parse(std::string_view(line).substr(0, c1)), line.substr(c1 + 1, c2 - c1 - 1),
                   line.substr(c2 + 1)});
  }
  return LexiconSentimentProvider(std::move(out));
}

SourceReading LexiconSentimentProvider::score(const Headline& headline) const {
  int pos = 0, neg = 0;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (std::binary_search(positive_.begin(), positive_.end(), word)) ++pos;
    if (std::binary_search(negative_.begin(), negative_.end(), word)) ++neg;
    word.clear();
  };
  for (unsigned char c : headline.text) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  SourceReading r{headline.source, headline.time, 0.5, SentimentLabel::Neutral};
  if (pos + neg > 0) r.probability = 0.5 + 0.5 * static_cast<double>(pos - neg) / (pos + neg);
  if (pos > neg) r.label = SentimentLabel::Positive;
  if (neg > pos) r.label = SentimentLabel::Negative;
  return r;
}

std::vector<SourceReading> LexiconSentimentProvider::read(Timestamp time) const {
  std::vector<std::string> sources;
  std::vector<const Headline*> latest;
  for (const auto& h : headlines_) {
    if (h.time > time) break;
    auto it = std::find(sources.begin(), sources.end(), h.source);
    if (it == sources.end()) {
      sources.push_back(h.source);
      latest.push_back(&h);
    } else {
      latest[static_cast<std::size_t>(it - sources.begin())] = &h;
    }
  }
  std::vector<SourceReading> out;
  for (const auto* h : latest) out.push_back(score(*h));
  return out;
}

std::vector<std::string> LexiconSentimentProvider::default_positive_words() {
  return {"gain", "gains", "rally", "rallies", "surge", "surges", "rise", "rises", "rising",
          "bullish", "up", "higher", "record", "strong", "strength", "climb", "climbs", "boost",
          "soar", "soars", "upbeat", "optimism", "rebound"};
}

std::vector<std::string> LexiconSentimentProvider::default_negative_words() {
  return {"loss", "losses", "fall", "falls", "falling", "drop", "drops", "plunge", "plunges",
          "bearish", "down", "lower", "weak", "weakness", "slump", "slumps", "decline", "declines",
          "sink", "sinks", "fear", "selloff", "slide"};
}

} // namespace achilles
