#pragma once

#include "achilles/time.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace achilles {

enum class Side { Buy, Sell };
std::string_view to_string(Side side) noexcept;
Side parse_side(std::string_view text);

struct BrokerConfig {
  double contract_multiplier = 100.0; ///< units of underlying per 1.0 lot
  double volume_step = 0.01;
  double min_volume = 0.01;
  std::size_t max_open_orders = 5;
  double fee_per_order = 0.0; ///< charged once, at close

  void validate() const;
};

struct SizingInputs {
  double balance = 0.0;
  double risk = 0.0;
  double price = 0.0;

  void validate() const;
};

/// balance * risk / price, unrounded.
double raw_position_size(const SizingInputs& inputs);

/// Raw size floored to the volume step; nullopt when below the minimum volume.
std::optional<double> position_size(const SizingInputs& inputs, const BrokerConfig& config = {});

using OrderId = std::uint64_t;

struct Order {
  OrderId id = 0;
  Side side = Side::Buy;
  double volume = 0.0;
  double open_price = 0.0;
  Timestamp open_time;
  std::optional<double> close_price;
  std::optional<Timestamp> close_time;
  double realized_pnl = 0.0;
};

/// Buy: (current - open) * volume * multiplier; Sell is the negation.
double unrealized_pnl(const Order& order, double current_price, double multiplier);

enum class TradeEventKind { Open, Close };

/// One row of the trade log.
struct TradeEvent {
  Timestamp time;
  TradeEventKind kind = TradeEventKind::Open;
  OrderId order_id = 0;
  Side side = Side::Buy;
  double volume = 0.0;
  double price = 0.0;
  double realized_pnl = 0.0;
  double balance = 0.0;
  bool operator==(const TradeEvent&) const = default;
};

/// Zero-margin paper account. Every mutation either applies fully or throws
/// without touching state.
class Account {
public:
  explicit Account(double initial_balance, BrokerConfig config = {});

  double initial_balance() const noexcept { return initial_; }
  double balance() const noexcept { return balance_; }
  const BrokerConfig& config() const noexcept { return config_; }
  const std::vector<Order>& open_orders() const noexcept { return open_; }
  const std::vector<Order>& closed_orders() const noexcept { return closed_; }

  TradeEvent open_order(Side side, double volume, double price, Timestamp time);
  TradeEvent close_order(OrderId id, double price, Timestamp time);

  /// Open orders (optionally one side only) by unrealized pnl descending,
  /// ties by earlier open time then lower id; at most k ids.
  std::vector<OrderId> top_k_by_profit(std::size_t k, double current_price,
                                       std::optional<Side> side = std::nullopt) const;

  double unrealized(double current_price) const;
  double equity(double current_price) const { return balance_ + unrealized(current_price); }
  std::size_t count_open(Side side) const;

private:
  double initial_;
  double balance_;
  BrokerConfig config_;
  std::vector<Order> open_;
  std::vector<Order> closed_;
  OrderId next_id_ = 1;
};

/// `time,event,order_id,side,volume,price,realized_pnl,balance`
void write_trade_log(std::ostream& sink, std::span<const TradeEvent> events);
std::vector<TradeEvent> read_trade_log(std::istream& source);

/// Rebuilds an account by re-applying the log; throws CorruptFeed when a
/// logged id, pnl, or balance disagrees with the replayed value.
Account replay_trade_log(std::span<const TradeEvent> events, double initial_balance,
                         const BrokerConfig& config = {});

} // namespace achilles
