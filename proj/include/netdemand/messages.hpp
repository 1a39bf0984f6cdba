#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "netdemand/lob.hpp"

namespace netdemand {

enum class MsgType { Add, Modify, Delete };
enum class DeleteKind { Unknown, Cancelled, Filled };

struct MessageEvent {
    MsgType type = MsgType::Add;
    Side side = Side::Buy;
    std::int64_t timestamp_ns = 0;  // since midnight
    std::uint64_t order_id = 0;
    double price = 0.0;
    std::int64_t size = 0;
    DeleteKind kind = DeleteKind::Unknown;
};

inline constexpr std::int64_t kNsPerSecond = 1'000'000'000;
inline constexpr std::int64_t kSessionOpenNs = (9 * 3600 + 30 * 60) * kNsPerSecond;
inline constexpr std::int64_t kSessionCloseNs = 16 * 3600 * kNsPerSecond;

struct ParseIssue {
    std::size_t line;
    std::string message;
};

struct ParseResult {
    std::vector<MessageEvent> events;
    std::vector<ParseIssue> issues;
};

// One event per line: type(A|M|D),side(B|S),timestamp_ns,order_id,price,size.
// Blank lines and lines starting with '#' are skipped.
ParseResult parse_messages(std::istream& in, bool strict = false);
ParseResult parse_messages_file(const std::string& path, bool strict = false);

void write_messages(std::ostream& out, const std::vector<MessageEvent>& events);

struct CleanResult {
    std::vector<MessageEvent> events;
    std::size_t dropped_price = 0;
    std::size_t dropped_time = 0;
    double retention = 1.0;
};

CleanResult clean(const std::vector<MessageEvent>& events, double p_min, double p_max,
                  std::int64_t open_ns = kSessionOpenNs, std::int64_t close_ns = kSessionCloseNs);

struct CancellationResult {
    std::vector<MessageEvent> events;
    std::size_t orphan_deletes = 0;
    std::size_t cancelled = 0;
    std::size_t filled = 0;
};

inline constexpr std::int64_t kCancelWindowNs = 120 * kNsPerSecond;

// A Delete no later than two minutes after a Modify of the same order is a
// cancellation; any other Delete removes a filled order.
CancellationResult infer_cancellations(const std::vector<MessageEvent>& events);

struct ReplayStats {
    std::size_t applied = 0;
    std::size_t orphans = 0;
    std::size_t rejected = 0;
    std::size_t trades = 0;
};

// Drives an OrderBook from message events.  Modify is cancel + resubmit.
class Replayer {
public:
    explicit Replayer(double opening_price, double max_price = 1.0e6) : book_(opening_price, max_price) {}

    std::vector<Trade> apply(const MessageEvent& event);

    const OrderBook& book() const { return book_; }
    const ReplayStats& stats() const { return stats_; }

private:
    OrderBook book_;
    ReplayStats stats_;
};

}  // namespace netdemand
