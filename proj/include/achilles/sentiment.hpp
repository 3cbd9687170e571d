#pragma once

#include "achilles/time.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace achilles {

enum class SentimentLabel { Positive, Negative, Neutral };

/// Positive = 1, Negative = -1, Neutral = 0.
int label_to_number(SentimentLabel label) noexcept;
SentimentLabel parse_label(std::string_view text);
std::string_view to_string(SentimentLabel label) noexcept;

struct SourceReading {
  std::string source;
  Timestamp time;
  double probability = 0.5; ///< bullishness in [0,1]
  SentimentLabel label = SentimentLabel::Neutral;
};

struct SentimentSnapshot {
  Timestamp time;
  std::vector<SourceReading> readings;
  double avg_probability = 0.5;
  double avg_sentiment = 0.0;
  /// No source had published yet; the averages are the neutral defaults.
  bool cold_start = false;
};

/// Arithmetic means of probabilities and mapped labels. Snapshot time is the
/// latest reading time.
SentimentSnapshot aggregate(std::span<const SourceReading> readings);

/// Neutral placeholder used before any source has published.
SentimentSnapshot cold_start_snapshot(Timestamp time);

class SentimentProvider {
public:
  virtual ~SentimentProvider() = default;
  /// Latest reading per source at or before `time`; empty on cold start.
  virtual std::vector<SourceReading> read(Timestamp time) const = 0;
};

/// Aggregated snapshot at `time`, or the cold-start snapshot.
SentimentSnapshot snapshot_at(const SentimentProvider& provider, Timestamp time);

/// Replays a `Time,Source,Probability,Label` feed.
class FileSentimentProvider final : public SentimentProvider {
public:
  explicit FileSentimentProvider(std::vector<SourceReading> feed);
  static FileSentimentProvider load(std::istream& source);

  std::vector<SourceReading> read(Timestamp time) const override;
  const std::vector<std::string>& sources() const noexcept { return sources_; }
  const std::vector<SourceReading>& feed() const noexcept { return feed_; }

private:
  std::vector<SourceReading> feed_; ///< sorted by time, stable
  std::vector<std::string> sources_; ///< in order of first appearance
};

void write_sentiment_feed(std::ostream& sink, std::span<const SourceReading> feed);

struct Headline {
  Timestamp time;
  std::string source;
  std::string text;
};

/// Deterministic keyword scorer standing in for a text model. With p positive
/// and q negative keyword hits, probability = 0.5 + 0.5 * (p - q) / (p + q)
/// (0.5 when neither occurs) and the label follows the sign of p - q.
class LexiconSentimentProvider final : public SentimentProvider {
public:
  explicit LexiconSentimentProvider(std::vector<Headline> headlines,
                                    std::vector<std::string> positive = default_positive_words(),
                                    std::vector<std::string> negative = default_negative_words());

  /// `Time,Source,Headline`; the headline is everything after the second comma.
  static LexiconSentimentProvider load(std::istream& source);

  SourceReading score(const Headline& headline) const;
  std::vector<SourceReading> read(Timestamp time) const override;

  static std::vector<std::string> default_positive_words();
  static std::vector<std::string> default_negative_words();

private:
  std::vector<Headline> headlines_;
  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
};

} // namespace achilles
