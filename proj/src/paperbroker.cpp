#include "achilles/paperbroker.hpp"

#include "achilles/csv.hpp"
#include "achilles/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace achilles {

std::string_view to_string(Side side) noexcept { return side == Side::Buy ? "buy" : "sell"; }

Side parse_side(std::string_view text) {
  if (text == "buy") return Side::Buy;
  if (text == "sell") return Side::Sell;
  throw Error(ErrorKind::BadInput, fmt::format("unknown order side '{}'", text));
}

void BrokerConfig::validate() const {
  if (!(contract_multiplier > 0.0) || !(volume_step > 0.0) || !(min_volume > 0.0) ||
      max_open_orders == 0 || !(fee_per_order >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid broker config");
  }
}

void SizingInputs::validate() const {
  if (!(balance >= 0.0) || !(risk > 0.0 && risk <= 1.0) || !(price > 0.0)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("sizing needs balance >= 0, 0 < risk <= 1, price > 0 (got {}, {}, {})",
                            balance, risk, price));
  }
}

double raw_position_size(const SizingInputs& inputs) {
  inputs.validate();
  return inputs.balance * inputs.risk / inputs.price;
}

std::optional<double> position_size(const SizingInputs& inputs, const BrokerConfig& config) {
  config.validate();
  const double raw = raw_position_size(inputs);
  // The epsilon absorbs representation error such as 1.0 / 0.01 = 99.999...
  const double steps = std::floor(raw / config.volume_step + 1e-9);
  const double volume = steps * config.volume_step;
  if (volume < config.min_volume - 1e-12) return std::nullopt;
  return volume;
}

double unrealized_pnl(const Order& order, double current_price, double multiplier) {
  const double move = order.side == Side::Buy ? current_price - order.open_price
                                              : order.open_price - current_price;
  return move * order.volume * multiplier;
}

Account::Account(double initial_balance, BrokerConfig config)
    : initial_(initial_balance), balance_(initial_balance), config_(config) {
  config_.validate();
  if (!(initial_balance >= 0.0) || !std::isfinite(initial_balance)) {
    throw Error(ErrorKind::InvalidArgument, "initial balance must be a non-negative finite number");
  }
}

TradeEvent Account::open_order(Side side, double volume, double price, Timestamp time) {
  if (!(volume >= config_.min_volume - 1e-12) || !std::isfinite(volume)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("volume {} below minimum {}", volume, config_.min_volume));
  }
  if (!(price > 0.0) || !std::isfinite(price)) {
    throw Error(ErrorKind::InvalidArgument, "order price must be positive");
  }
  if (open_.size() >= config_.max_open_orders) {
    throw Error(ErrorKind::Rejected,
                fmt::format("open-order cap of {} reached", config_.max_open_orders));
  }
  Order o;
  o.id = next_id_++;
  o.side = side;
  o.volume = volume;
  o.open_price = price;
  o.open_time = time;
  open_.push_back(o);
  return {time, TradeEventKind::Open, o.id, side, volume, price, 0.0, balance_};
}

TradeEvent Account::close_order(OrderId id, double price, Timestamp time) {
  auto it = std::find_if(open_.begin(), open_.end(), [&](const Order& o) { return o.id == id; });
  if (it == open_.end()) {
    throw Error(ErrorKind::NotFound, fmt::format("order {} is not open", id));
  }
  if (!(price > 0.0) || !std::isfinite(price)) {
    throw Error(ErrorKind::InvalidArgument, "close price must be positive");
  }
  if (time < it->open_time) {
    throw Error(ErrorKind::InvalidArgument, "close time precedes open time");
  }
  Order o = *it;
  o.close_price = price;
  o.close_time = time;
  o.realized_pnl = unrealized_pnl(o, price, config_.contract_multiplier) - config_.fee_per_order;
  open_.erase(it);
  balance_ += o.realized_pnl;
  closed_.push_back(o);
  return {time, TradeEventKind::Close, o.id, o.side, o.volume, price, o.realized_pnl, balance_};
}

std::vector<OrderId> Account::top_k_by_profit(std::size_t k, double current_price,
                                              std::optional<Side> side) const {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be at least 1");
  struct Ranked {
    double pnl;
    Timestamp open_time;
    OrderId id;
  };
  std::vector<Ranked> ranked;
  for (const auto& o : open_) {
    if (side && o.side != *side) continue;
    ranked.push_back({unrealized_pnl(o, current_price, config_.contract_multiplier), o.open_time, o.id});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.pnl != b.pnl) return a.pnl > b.pnl;
    if (a.open_time != b.open_time) return a.open_time < b.open_time;
    return a.id < b.id;
  });
  std::vector<OrderId> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].id);
  return out;
}

double Account::unrealized(double current_price) const {
  double sum = 0.0;
  for (const auto& o : open_) sum += unrealized_pnl(o, current_price, config_.contract_multiplier);
  return sum;
}

std::size_t Account::count_open(Side side) const {
  return static_cast<std::size_t>(
      std::count_if(open_.begin(), open_.end(), [&](const Order& o) { return o.side == side; }));
}

void write_trade_log(std::ostream& sink, std::span<const TradeEvent> events) {
  sink << "time,event,order_id,side,volume,price,realized_pnl,balance\n";
  for (const auto& e : events) {
    sink << e.time.to_string() << ',' << (e.kind == TradeEventKind::Open ? "open" : "close") << ','
         << e.order_id << ',' << to_string(e.side) << ',' << csv::exact(e.volume) << ','
         << csv::exact(e.price) << ',' << csv::exact(e.realized_pnl) << ',' << csv::exact(e.balance)
         << '\n';
  }
  if (!sink) throw Error(ErrorKind::Io, "failed writing trade log");
}

std::vector<TradeEvent> read_trade_log(std::istream& source) {
  std::string line;
  if (!csv::next_line(source, line)) throw Error(ErrorKind::BadInput, "trade log is missing its header");
  if (line != "time,event,order_id,side,volume,price,realized_pnl,balance") {
    throw Error(ErrorKind::BadInput, fmt::format("unexpected trade log header '{}'", line));
  }
  std::vector<TradeEvent> out;
  while (csv::next_line(source, line)) {
    auto f = csv::split(line);
    if (f.size() != 8) throw Error(ErrorKind::BadInput, fmt::format("malformed trade log row '{}'", line));
    TradeEvent e;
    e.time = Timestamp::parse(f[0]);
    if (f[1] == "open") {
      e.kind = TradeEventKind::Open;
    } else if (f[1] == "close") {
      e.kind = TradeEventKind::Close;
    } else {
      throw Error(ErrorKind::BadInput, fmt::format("unknown trade event '{}'", f[1]));
    }
    e.order_id = static_cast<OrderId>(csv::parse_double(f[2], "order_id"));
    e.side = parse_side(f[3]);
    e.volume = csv::parse_double(f[4], "volume");
    e.price = csv::parse_double(f[5], "price");
    e.realized_pnl = csv::parse_double(f[6], "realized_pnl");
    e.balance = csv::parse_double(f[7], "balance");
    out.push_back(e);
  }
  return out;
}

Account replay_trade_log(std::span<const TradeEvent> events, double initial_balance,
                         const BrokerConfig& config) {
  // Replay ignores the cap: the log already reflects which opens were accepted.
  BrokerConfig relaxed = config;
  relaxed.max_open_orders = static_cast<std::size_t>(-1);
  Account account(initial_balance, relaxed);
  for (const auto& e : events) {
    TradeEvent got = e.kind == TradeEventKind::Open
                         ? account.open_order(e.side, e.volume, e.price, e.time)
                         : account.close_order(e.order_id, e.price, e.time);
    if (got.order_id != e.order_id || got.realized_pnl != e.realized_pnl || got.balance != e.balance ||
        got.side != e.side) {
      throw Error(ErrorKind::CorruptFeed,
                  fmt::format("trade log disagrees with replay at order {} ({})", e.order_id,
                              e.time.to_string()));
    }
  }
  return account;
}

} // namespace achilles
