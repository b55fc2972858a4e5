#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pumpwatch {

// One hourly kline. Prices in quote currency, volume in base units,
// quote_asset_volume in quote units; taker_buy_* are the aggressive-buy
// portions of the same quantities.
struct Candle {
    std::int64_t open_time = 0;  // epoch seconds, hour-aligned
    double open = 0, high = 0, low = 0, close = 0;
    double volume = 0;
    double quote_asset_volume = 0;
    std::int64_t num_trades = 0;
    double taker_buy_base = 0;
    double taker_buy_quote = 0;
};

struct CandleSeries {
    std::string symbol;
    std::vector<Candle> candles;  // ascending open_time, no duplicates
};

struct PumpEvent {
    int token_id = -1;  // node index after panel assembly
    std::string symbol;
    std::int64_t raw_time = 0;
    std::int64_t snapped_time = 0;  // nearest hour, :30 rounds up
};

}  // namespace pumpwatch
