#pragma once

#include <string>
#include <vector>

#include "pumpwatch/candle.hpp"

namespace pumpwatch {

// Parse raw exchange kline records (one comma-separated row per candle):
//   open_time_ms, open, high, low, close, volume, close_time_ms,
//   quote_asset_volume, num_trades, taker_buy_base, taker_buy_quote[, ignore]
// Rows may arrive out of order; output is sorted by open_time. Throws
// MalformedRow (with 1-based row number) or DuplicateTimestamp.
CandleSeries parse_kline_rows(const std::vector<std::string>& rows,
                              const std::string& symbol);

// Kline files on disk are the raw rows above, no header.
CandleSeries read_kline_csv(const std::string& path, const std::string& symbol);
void write_kline_csv(const std::string& path, const std::vector<std::string>& raw_rows);

}  // namespace pumpwatch
