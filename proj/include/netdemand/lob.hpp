#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace netdemand {

enum class Side { Buy, Sell };
enum class OrderClass { Cross, Uncross };

using Ticks = std::int64_t;

inline constexpr double kTickSize = 0.01;

Ticks to_ticks(double price);
double to_price(Ticks ticks);

struct LimitOrder {
    std::uint64_t id = 0;
    Side side = Side::Buy;
    double limit_price = 0.0;
    std::int64_t quantity = 0;
};

struct Trade {
    std::uint64_t taker_id;
    std::uint64_t maker_id;
    double price;
    std::int64_t quantity;
};

struct Level {
    double price;
    std::int64_t quantity;
    bool operator==(const Level&) const = default;
};

struct RestingOrder {
    std::uint64_t id;
    std::int64_t quantity;
    std::uint64_t seq;
    bool operator==(const RestingOrder&) const = default;
};

struct BookSnapshot {
    // Aggregated by price; bids descending, asks ascending.
    std::vector<Level> bids;
    std::vector<Level> asks;
    double clearing_price;
    bool operator==(const BookSnapshot&) const = default;
};

struct FlowTotals {
    std::int64_t submitted = 0;
    std::int64_t filled = 0;  // both sides of internal trades, plus external executions
    std::int64_t cancelled = 0;
};

// Price-time priority book.  Prices are integer ticks internally.
class OrderBook {
public:
    explicit OrderBook(double opening_price = 0.0, double max_price = 1.0e6);

    std::vector<Trade> submit_order(const LimitOrder& order);
    void cancel_order(std::uint64_t id);
    // Removes a resting order reported as executed elsewhere; the clearing
    // price moves to its limit price.
    void execute_resting(std::uint64_t id);

    double clearing_price() const { return to_price(last_price_); }
    bool has_traded() const { return traded_; }

    std::optional<double> best_bid() const;
    std::optional<double> best_ask() const;

    bool contains(std::uint64_t id) const { return index_.count(id) != 0; }
    std::optional<LimitOrder> find(std::uint64_t id) const;

    BookSnapshot snapshot() const;
    std::vector<RestingOrder> queue_at(Side side, double price) const;

    // Resting orders as (side, price, quantity) triples.
    std::vector<LimitOrder> resting_orders() const;
    std::int64_t resting_quantity() const;

    const FlowTotals& totals() const { return totals_; }
    double max_price() const { return to_price(max_ticks_); }

private:
    using Queue = std::deque<RestingOrder>;
    struct Location {
        Side side;
        Ticks price;
    };

    template <class Book>
    void match(Book& opposite, LimitOrder& incoming, Ticks limit,
               std::vector<Trade>& trades, bool buy);

    std::map<Ticks, Queue, std::greater<Ticks>> bids_;
    std::map<Ticks, Queue> asks_;
    std::unordered_map<std::uint64_t, Location> index_;
    Ticks last_price_;
    Ticks max_ticks_;
    bool traded_ = false;
    std::uint64_t next_seq_ = 1;
    FlowTotals totals_;
};

OrderClass classify_order(const LimitOrder& order, double last_clearing);

// Definition-1 net demand sampled at each grid price.
std::vector<double> net_demand_snapshot(const OrderBook& book, const std::vector<double>& grid);

}  // namespace netdemand
