#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pumpwatch/candle.hpp"

namespace pumpwatch {

// Entry from the pump schedule file before it is matched to a token index.
struct ScheduleEntry {
    std::string symbol;
    std::int64_t raw_time = 0;
};

// Rectangular token x hour grid. Token order is the sorted symbol list and
// doubles as the node index for every graph. Missing exchange hours keep
// their grid slot with present=false.
struct Panel {
    std::vector<std::string> symbols;       // sorted, index = token id
    std::vector<std::int64_t> timestamps;   // contiguous hourly grid
    std::vector<Candle> cells;              // [token][hour], row-major
    std::vector<std::uint8_t> present;      // candle exists at (token, hour)
    std::vector<std::uint8_t> labels;       // pump flag y_{i,t}
    std::vector<PumpEvent> events;          // resolved schedule (assembly only)

    std::int64_t n_tokens() const { return static_cast<std::int64_t>(symbols.size()); }
    std::int64_t n_hours() const { return static_cast<std::int64_t>(timestamps.size()); }
    std::size_t idx(std::int64_t token, std::int64_t hour) const {
        return static_cast<std::size_t>(token * n_hours() + hour);
    }
    // Grid position of an hour-aligned timestamp, or -1 if off grid.
    std::int64_t hour_index(std::int64_t ts) const;
};

// Nearest hour boundary; exact :30:00 rounds up.
std::int64_t snap_pump_time(std::int64_t raw_time);

// Merge per-token series onto the union hourly grid and attach labels.
// Input order of `series` is irrelevant (tokens are sorted by symbol).
// Throws EventOffGrid for events whose snapped time misses the grid or
// whose symbol has no series.
Panel assemble_panel(std::vector<CandleSeries> series,
                     const std::vector<ScheduleEntry>& schedule);

// Chronological split with embargo: train = first floor(f_train*T) hours,
// raw val/test = next floor(f_val*T) / remaining hours, each with its first
// z hours discarded.
struct SplitIndex {
    std::vector<std::int64_t> train_ts, val_ts, test_ts;
    int embargo_hours = 0;
    // Half-open index ranges into Panel::timestamps.
    std::int64_t train_begin = 0, train_end = 0;
    std::int64_t val_begin = 0, val_end = 0;
    std::int64_t test_begin = 0, test_end = 0;
};

SplitIndex chronological_split(const Panel& panel, double f_train = 0.6,
                               double f_val = 0.2, int z = 5);

// Panel CSV: header symbol,timestamp_utc,open,high,low,close,volume,
// quote_asset_volume,num_trades,taker_buy_base,taker_buy_quote,flag.
// One row per grid cell sorted by (symbol, timestamp); missing candles
// leave the nine numeric fields empty but keep the flag. Numbers use
// shortest round-trip formatting, so write -> read is bit-exact.
void write_panel_csv(const std::string& path, const Panel& panel);
Panel read_panel_csv(const std::string& path);

// Pump schedule CSV: header symbol,timestamp_utc (ISO-8601).
std::vector<ScheduleEntry> read_schedule_csv(const std::string& path);
void write_schedule_csv(const std::string& path,
                        const std::vector<ScheduleEntry>& entries);

}  // namespace pumpwatch
