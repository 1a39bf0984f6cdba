#include "netdemand/messages.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "netdemand/errors.hpp"

namespace netdemand {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

std::string parse_line(std::string_view line, MessageEvent& ev) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (fields.size() != 6) return "expected 6 fields, got " + std::to_string(fields.size());

    if (fields[0] == "A")
        ev.type = MsgType::Add;
    else if (fields[0] == "M")
        ev.type = MsgType::Modify;
    else if (fields[0] == "D")
        ev.type = MsgType::Delete;
    else
        return "bad message type '" + std::string(fields[0]) + "'";

    if (fields[1] == "B")
        ev.side = Side::Buy;
    else if (fields[1] == "S")
        ev.side = Side::Sell;
    else
        return "bad side '" + std::string(fields[1]) + "'";

    if (!parse_number(fields[2], ev.timestamp_ns) || ev.timestamp_ns < 0) return "bad timestamp";
    if (!parse_number(fields[3], ev.order_id)) return "bad order id";
    if (!parse_number(fields[4], ev.price) || !(ev.price > 0.0)) return "bad price";
    if (!parse_number(fields[5], ev.size) || ev.size < 0) return "bad size";
    return {};
}

}  // namespace

ParseResult parse_messages(std::istream& in, bool strict) {
    if (!in) throw IoError("unreadable message stream");
    ParseResult result;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        MessageEvent ev;
        std::string err = parse_line(body, ev);
        if (!err.empty()) {
            if (strict) throw IoError("line " + std::to_string(number) + ": " + err);
            result.issues.push_back({number, std::move(err)});
            continue;
        }
        result.events.push_back(ev);
    }
    if (in.bad()) throw IoError("read failure on message stream");
    return result;
}

ParseResult parse_messages_file(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_messages(in, strict);
}

void write_messages(std::ostream& out, const std::vector<MessageEvent>& events) {
    static constexpr char kType[] = {'A', 'M', 'D'};
    for (const auto& ev : events) {
        out << kType[static_cast<int>(ev.type)] << ',' << (ev.side == Side::Buy ? 'B' : 'S') << ','
            << ev.timestamp_ns << ',' << ev.order_id << ',' << std::fixed << std::setprecision(2) << ev.price << ','
            << ev.size << '\n';
    }
}

CleanResult clean(const std::vector<MessageEvent>& events, double p_min, double p_max, std::int64_t open_ns,
                  std::int64_t close_ns) {
    if (!(p_min < p_max)) throw ArgumentError("clean: p_min must be below p_max");
    CleanResult r;
    r.events.reserve(events.size());
    for (const auto& ev : events) {
        if (ev.price < p_min || ev.price > p_max) {
            ++r.dropped_price;
        } else if (ev.timestamp_ns < open_ns || ev.timestamp_ns > close_ns) {
            ++r.dropped_time;
        } else {
            r.events.push_back(ev);
        }
    }
    r.retention = events.empty() ? 1.0 : static_cast<double>(r.events.size()) / static_cast<double>(events.size());
    return r;
}

CancellationResult infer_cancellations(const std::vector<MessageEvent>& events) {
    struct Seen {
        bool added = false;
        bool modified = false;
        std::int64_t last_modify = 0;
    };
    CancellationResult r;
    r.events = events;
    std::unordered_map<std::uint64_t, Seen> seen;
    for (auto& ev : r.events) {
        Seen& s = seen[ev.order_id];
        switch (ev.type) {
            case MsgType::Add:
                s = Seen{true, false, 0};
                break;
            case MsgType::Modify:
                s.modified = true;
                s.last_modify = ev.timestamp_ns;
                break;
            case MsgType::Delete:
                if (!s.added) ++r.orphan_deletes;
                if (s.modified && ev.timestamp_ns - s.last_modify <= kCancelWindowNs) {
                    ev.kind = DeleteKind::Cancelled;
                    ++r.cancelled;
                } else {
                    ev.kind = DeleteKind::Filled;
                    ++r.filled;
                }
                seen.erase(ev.order_id);
                break;
        }
    }
    return r;
}

std::vector<Trade> Replayer::apply(const MessageEvent& ev) {
    std::vector<Trade> trades;
    const bool resting = book_.contains(ev.order_id);
    switch (ev.type) {
        case MsgType::Add:
            if (resting || ev.size <= 0) {
                ++stats_.rejected;
                return trades;
            }
            trades = book_.submit_order({ev.order_id, ev.side, ev.price, ev.size});
            break;
        case MsgType::Modify:
            if (!resting) {
                ++stats_.orphans;
                return trades;
            }
            book_.cancel_order(ev.order_id);
            if (ev.size > 0) trades = book_.submit_order({ev.order_id, ev.side, ev.price, ev.size});
            break;
        case MsgType::Delete:
            if (!resting) {
                ++stats_.orphans;
                return trades;
            }
            if (ev.kind == DeleteKind::Filled)
                book_.execute_resting(ev.order_id);
            else
                book_.cancel_order(ev.order_id);
            break;
    }
    ++stats_.applied;
    stats_.trades += trades.size();
    return trades;
}

}  // namespace netdemand
