#include "pumpwatch/kline.hpp"

#include <algorithm>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/timeutil.hpp"

namespace pumpwatch {

CandleSeries parse_kline_rows(const std::vector<std::string>& rows,
                              const std::string& symbol) {
    CandleSeries out;
    out.symbol = symbol;
    out.candles.reserve(rows.size());
    std::size_t row_no = 0;
    for (const std::string& row : rows) {
        ++row_no;
        if (row.empty()) continue;
        auto f = split_csv(row);
        if (f.size() < 11)
            throw MalformedRow(row_no, "kline row has " + std::to_string(f.size()) +
                                           " fields, need >= 11");
        Candle c;
        std::int64_t open_ms = parse_i64(f[0], row_no, "open_time_ms");
        if (open_ms % 1000 != 0 || !is_hour_aligned(open_ms / 1000))
            throw MalformedRow(row_no, "open_time " + std::string(f[0]) +
                                           " is not an hour boundary");
        c.open_time = open_ms / 1000;
        c.open = parse_double(f[1], row_no, "open");
        c.high = parse_double(f[2], row_no, "high");
        c.low = parse_double(f[3], row_no, "low");
        c.close = parse_double(f[4], row_no, "close");
        c.volume = parse_double(f[5], row_no, "volume");
        // f[6] is close_time_ms; implied by open_time for 1h candles.
        c.quote_asset_volume = parse_double(f[7], row_no, "quote_asset_volume");
        c.num_trades = parse_i64(f[8], row_no, "num_trades");
        c.taker_buy_base = parse_double(f[9], row_no, "taker_buy_base");
        c.taker_buy_quote = parse_double(f[10], row_no, "taker_buy_quote");

        if (c.low > std::min(c.open, c.close) || c.high < std::max(c.open, c.close))
            throw MalformedRow(row_no, "candle shape violated (low/high vs open/close)");
        if (c.volume < 0 || c.quote_asset_volume < 0 || c.num_trades < 0 ||
            c.taker_buy_base < 0 || c.taker_buy_quote < 0)
            throw MalformedRow(row_no, "negative volume or trade count");
        out.candles.push_back(c);
    }
    std::sort(out.candles.begin(), out.candles.end(),
              [](const Candle& a, const Candle& b) { return a.open_time < b.open_time; });
    for (std::size_t i = 1; i < out.candles.size(); ++i)
        if (out.candles[i].open_time == out.candles[i - 1].open_time)
            throw DuplicateTimestamp(symbol + ": duplicate candle at " +
                                     format_iso8601(out.candles[i].open_time));
    return out;
}

CandleSeries read_kline_csv(const std::string& path, const std::string& symbol) {
    return parse_kline_rows(read_lines(path), symbol);
}

void write_kline_csv(const std::string& path, const std::vector<std::string>& raw_rows) {
    std::string body;
    for (const std::string& r : raw_rows) {
        body += r;
        body += '\n';
    }
    write_file(path, body);
}

}  // namespace pumpwatch
