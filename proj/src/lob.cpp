#include "netdemand/lob.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "netdemand/errors.hpp"

namespace netdemand {

Ticks to_ticks(double price) { return static_cast<Ticks>(std::llround(price / kTickSize)); }

double to_price(Ticks ticks) { return static_cast<double>(ticks) * kTickSize; }

OrderBook::OrderBook(double opening_price, double max_price)
    : last_price_(to_ticks(opening_price)), max_ticks_(to_ticks(max_price)) {
    if (!(max_price > 0.0)) throw ArgumentError("max_price must be positive");
}

template <class Book>
void OrderBook::match(Book& opposite, LimitOrder& incoming, Ticks limit,
                      std::vector<Trade>& trades, bool buy) {
    while (incoming.quantity > 0 && !opposite.empty()) {
        auto level = opposite.begin();
        const Ticks px = level->first;
        if (buy ? px > limit : px < limit) break;
        Queue& queue = level->second;
        while (incoming.quantity > 0 && !queue.empty()) {
            RestingOrder& maker = queue.front();
            const std::int64_t qty = std::min(maker.quantity, incoming.quantity);
            trades.push_back({incoming.id, maker.id, to_price(px), qty});
            maker.quantity -= qty;
            incoming.quantity -= qty;
            totals_.filled += 2 * qty;
            last_price_ = px;
            traded_ = true;
            if (maker.quantity == 0) {
                index_.erase(maker.id);
                queue.pop_front();
            }
        }
        if (queue.empty()) opposite.erase(level);
    }
}

std::vector<Trade> OrderBook::submit_order(const LimitOrder& order) {
    if (order.quantity <= 0) throw RejectError("order " + std::to_string(order.id) + ": quantity must be positive");
    if (index_.count(order.id)) throw RejectError("order " + std::to_string(order.id) + ": duplicate id");
    const Ticks limit = to_ticks(order.limit_price);
    if (limit < 0 || limit > max_ticks_)
        throw RejectError("order " + std::to_string(order.id) + ": limit price outside [0, S]");

    totals_.submitted += order.quantity;
    std::vector<Trade> trades;
    LimitOrder rest = order;
    const bool buy = order.side == Side::Buy;
    if (buy)
        match(asks_, rest, limit, trades, true);
    else
        match(bids_, rest, limit, trades, false);

    if (rest.quantity > 0) {
        RestingOrder r{rest.id, rest.quantity, next_seq_++};
        if (buy)
            bids_[limit].push_back(r);
        else
            asks_[limit].push_back(r);
        index_[rest.id] = {order.side, limit};
    }
    return trades;
}

void OrderBook::cancel_order(std::uint64_t id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("order " + std::to_string(id) + " is not resting");
    const Location loc = it->second;
    auto erase_from = [&](auto& book) {
        auto level = book.find(loc.price);
        Queue& queue = level->second;
        auto pos = std::find_if(queue.begin(), queue.end(), [&](const RestingOrder& r) { return r.id == id; });
        totals_.cancelled += pos->quantity;
        queue.erase(pos);
        if (queue.empty()) book.erase(level);
    };
    if (loc.side == Side::Buy)
        erase_from(bids_);
    else
        erase_from(asks_);
    index_.erase(it);
}

void OrderBook::execute_resting(std::uint64_t id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw NotFoundError("order " + std::to_string(id) + " is not resting");
    const Ticks px = it->second.price;
    const auto before = totals_.cancelled;
    cancel_order(id);
    totals_.filled += totals_.cancelled - before;
    totals_.cancelled = before;
    last_price_ = px;
    traded_ = true;
}

std::optional<double> OrderBook::best_bid() const {
    if (bids_.empty()) return std::nullopt;
    return to_price(bids_.begin()->first);
}

std::optional<double> OrderBook::best_ask() const {
    if (asks_.empty()) return std::nullopt;
    return to_price(asks_.begin()->first);
}

std::optional<LimitOrder> OrderBook::find(std::uint64_t id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    const Location loc = it->second;
    const Queue& queue = loc.side == Side::Buy ? bids_.at(loc.price) : asks_.at(loc.price);
    for (const auto& r : queue)
        if (r.id == id) return LimitOrder{id, loc.side, to_price(loc.price), r.quantity};
    return std::nullopt;
}

BookSnapshot OrderBook::snapshot() const {
    BookSnapshot s;
    s.clearing_price = clearing_price();
    auto sum = [](const Queue& q) {
        std::int64_t total = 0;
        for (const auto& r : q) total += r.quantity;
        return total;
    };
    for (const auto& [px, q] : bids_) s.bids.push_back({to_price(px), sum(q)});
    for (const auto& [px, q] : asks_) s.asks.push_back({to_price(px), sum(q)});
    return s;
}

std::vector<RestingOrder> OrderBook::queue_at(Side side, double price) const {
    const Ticks px = to_ticks(price);
    if (side == Side::Buy) {
        auto it = bids_.find(px);
        return it == bids_.end() ? std::vector<RestingOrder>{} : std::vector<RestingOrder>(it->second.begin(), it->second.end());
    }
    auto it = asks_.find(px);
    return it == asks_.end() ? std::vector<RestingOrder>{} : std::vector<RestingOrder>(it->second.begin(), it->second.end());
}

std::vector<LimitOrder> OrderBook::resting_orders() const {
    std::vector<LimitOrder> out;
    for (const auto& [px, q] : bids_)
        for (const auto& r : q) out.push_back({r.id, Side::Buy, to_price(px), r.quantity});
    for (const auto& [px, q] : asks_)
        for (const auto& r : q) out.push_back({r.id, Side::Sell, to_price(px), r.quantity});
    return out;
}

std::int64_t OrderBook::resting_quantity() const {
    std::int64_t total = 0;
    for (const auto& [px, q] : bids_)
        for (const auto& r : q) total += r.quantity;
    for (const auto& [px, q] : asks_)
        for (const auto& r : q) total += r.quantity;
    return total;
}

OrderClass classify_order(const LimitOrder& order, double last_clearing) {
    const Ticks p = to_ticks(order.limit_price);
    const Ticks pi = to_ticks(last_clearing);
    if (order.side == Side::Buy) return p > pi ? OrderClass::Cross : OrderClass::Uncross;
    return p < pi ? OrderClass::Cross : OrderClass::Uncross;
}

std::vector<double> net_demand_snapshot(const OrderBook& book, const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < 0.0 || grid[i] > book.max_price()) throw ArgumentError("grid price outside [0, S]");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ArgumentError("grid must be strictly increasing");
    }
    const BookSnapshot s = book.snapshot();
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        // Grid prices need not sit on the tick lattice.
        const double p = grid[i] / kTickSize;
        double demand = 0.0;
        for (const auto& l : s.bids)
            if (static_cast<double>(to_ticks(l.price)) >= p - 1e-9) demand += static_cast<double>(l.quantity);
        for (const auto& l : s.asks)
            if (static_cast<double>(to_ticks(l.price)) <= p + 1e-9) demand -= static_cast<double>(l.quantity);
        out[i] = demand;
    }
    return out;
}

}  // namespace netdemand
