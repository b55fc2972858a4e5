#include "pumpwatch/panel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/timeutil.hpp"

namespace pumpwatch {

std::int64_t Panel::hour_index(std::int64_t ts) const {
    if (timestamps.empty() || ts < timestamps.front() || ts > timestamps.back())
        return -1;
    std::int64_t k = (ts - timestamps.front()) / kSecondsPerHour;
    return timestamps[static_cast<std::size_t>(k)] == ts ? k : -1;
}

std::int64_t snap_pump_time(std::int64_t raw_time) { return snap_to_hour(raw_time); }

Panel assemble_panel(std::vector<CandleSeries> series,
                     const std::vector<ScheduleEntry>& schedule) {
    if (series.empty()) throw Error("assemble_panel: no token series");
    for (const auto& s : series)
        if (s.candles.empty())
            throw Error("assemble_panel: empty series for " + s.symbol);

    std::sort(series.begin(), series.end(),
              [](const CandleSeries& a, const CandleSeries& b) {
                  return a.symbol < b.symbol;
              });
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].symbol == series[i - 1].symbol)
            throw Error("assemble_panel: duplicate symbol " + series[i].symbol);

    std::int64_t first = series[0].candles.front().open_time;
    std::int64_t last = series[0].candles.back().open_time;
    for (const auto& s : series) {
        first = std::min(first, s.candles.front().open_time);
        last = std::max(last, s.candles.back().open_time);
    }

    Panel p;
    for (const auto& s : series) p.symbols.push_back(s.symbol);
    for (std::int64_t ts = first; ts <= last; ts += kSecondsPerHour)
        p.timestamps.push_back(ts);

    const std::int64_t n = p.n_tokens(), t = p.n_hours();
    p.cells.assign(static_cast<std::size_t>(n * t), Candle{});
    p.present.assign(static_cast<std::size_t>(n * t), 0);
    p.labels.assign(static_cast<std::size_t>(n * t), 0);

    for (std::int64_t i = 0; i < n; ++i)
        for (const Candle& c : series[static_cast<std::size_t>(i)].candles) {
            std::int64_t h = p.hour_index(c.open_time);
            if (h < 0)
                throw Error("assemble_panel: candle off grid at " +
                            format_iso8601(c.open_time));
            p.cells[p.idx(i, h)] = c;
            p.present[p.idx(i, h)] = 1;
        }

    for (const ScheduleEntry& e : schedule) {
        PumpEvent ev;
        ev.symbol = e.symbol;
        ev.raw_time = e.raw_time;
        ev.snapped_time = snap_pump_time(e.raw_time);
        auto it = std::lower_bound(p.symbols.begin(), p.symbols.end(), e.symbol);
        if (it == p.symbols.end() || *it != e.symbol)
            throw EventOffGrid("pump event for unknown symbol " + e.symbol);
        ev.token_id = static_cast<int>(it - p.symbols.begin());
        std::int64_t h = p.hour_index(ev.snapped_time);
        if (h < 0)
            throw EventOffGrid("pump event for " + e.symbol + " at " +
                               format_iso8601(ev.snapped_time) + " is outside the grid");
        p.labels[p.idx(ev.token_id, h)] = 1;
        p.events.push_back(std::move(ev));
    }
    return p;
}

SplitIndex chronological_split(const Panel& panel, double f_train, double f_val, int z) {
    if (f_train <= 0.0 || f_val <= 0.0 || f_train + f_val >= 1.0)
        throw ConfigError("chronological_split: fractions must satisfy 0 < f_train, "
                          "0 < f_val, f_train + f_val < 1");
    if (z < 0) throw ConfigError("chronological_split: embargo must be >= 0");
    const std::int64_t t = panel.n_hours();
    if (t <= 2 * z + 3)
        throw PanelTooShort("chronological_split: T=" + std::to_string(t) +
                            " <= 2z+3 with z=" + std::to_string(z));
    const std::int64_t b1 = static_cast<std::int64_t>(std::floor(f_train * static_cast<double>(t)));
    const std::int64_t b2 =
        b1 + static_cast<std::int64_t>(std::floor(f_val * static_cast<double>(t)));
    if (b1 < 1 || b2 - b1 <= z || t - b2 <= z)
        throw PanelTooShort("chronological_split: blocks too short for embargo z=" +
                            std::to_string(z));
    SplitIndex s;
    s.embargo_hours = z;
    s.train_begin = 0;
    s.train_end = b1;
    s.val_begin = b1 + z;
    s.val_end = b2;
    s.test_begin = b2 + z;
    s.test_end = t;
    for (std::int64_t k = s.train_begin; k < s.train_end; ++k)
        s.train_ts.push_back(panel.timestamps[static_cast<std::size_t>(k)]);
    for (std::int64_t k = s.val_begin; k < s.val_end; ++k)
        s.val_ts.push_back(panel.timestamps[static_cast<std::size_t>(k)]);
    for (std::int64_t k = s.test_begin; k < s.test_end; ++k)
        s.test_ts.push_back(panel.timestamps[static_cast<std::size_t>(k)]);
    return s;
}

/* ---- CSV round trip ---------------------------------------------------- */

static const char* kPanelHeader =
    "symbol,timestamp_utc,open,high,low,close,volume,quote_asset_volume,num_trades,"
    "taker_buy_base,taker_buy_quote,flag";

void write_panel_csv(const std::string& path, const Panel& panel) {
    std::string out;
    out += kPanelHeader;
    out += '\n';
    for (std::int64_t i = 0; i < panel.n_tokens(); ++i)
        for (std::int64_t h = 0; h < panel.n_hours(); ++h) {
            const std::size_t k = panel.idx(i, h);
            out += panel.symbols[static_cast<std::size_t>(i)];
            out += ',';
            out += format_iso8601(panel.timestamps[static_cast<std::size_t>(h)]);
            if (panel.present[k]) {
                const Candle& c = panel.cells[k];
                out += ',' + fmt_double(c.open) + ',' + fmt_double(c.high) + ',' +
                       fmt_double(c.low) + ',' + fmt_double(c.close) + ',' +
                       fmt_double(c.volume) + ',' + fmt_double(c.quote_asset_volume) +
                       ',' + fmt_int(c.num_trades) + ',' + fmt_double(c.taker_buy_base) +
                       ',' + fmt_double(c.taker_buy_quote);
            } else {
                out += ",,,,,,,,,";
            }
            out += ',';
            out += panel.labels[k] ? '1' : '0';
            out += '\n';
        }
    write_file(path, out);
}

Panel read_panel_csv(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty() || lines[0] != kPanelHeader)
        throw MalformedRow(1, "panel CSV header mismatch in " + path);

    struct Cell {
        Candle candle;
        bool present = false;
        bool label = false;
    };
    std::map<std::string, std::map<std::int64_t, Cell>> by_symbol;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        if (lines[row].empty()) continue;
        auto f = split_csv(lines[row]);
        if (f.size() != 12)
            throw MalformedRow(row + 1, "panel row has " + std::to_string(f.size()) +
                                            " fields, want 12");
        Cell cell;
        std::int64_t ts = parse_iso8601(std::string(f[1]));
        if (!is_hour_aligned(ts))
            throw MalformedRow(row + 1, "timestamp not hour-aligned");
        if (!f[2].empty()) {
            Candle& c = cell.candle;
            c.open_time = ts;
            c.open = parse_double(f[2], row + 1, "open");
            c.high = parse_double(f[3], row + 1, "high");
            c.low = parse_double(f[4], row + 1, "low");
            c.close = parse_double(f[5], row + 1, "close");
            c.volume = parse_double(f[6], row + 1, "volume");
            c.quote_asset_volume = parse_double(f[7], row + 1, "quote_asset_volume");
            c.num_trades = parse_i64(f[8], row + 1, "num_trades");
            c.taker_buy_base = parse_double(f[9], row + 1, "taker_buy_base");
            c.taker_buy_quote = parse_double(f[10], row + 1, "taker_buy_quote");
            cell.present = true;
        }
        if (f[11] == "1")
            cell.label = true;
        else if (f[11] != "0")
            throw MalformedRow(row + 1, "flag must be 0 or 1");
        by_symbol[std::string(f[0])][ts] = cell;
    }
    if (by_symbol.empty()) throw Error("read_panel_csv: no rows in " + path);

    Panel p;
    std::int64_t first = 0, last = 0;
    bool any = false;
    for (auto& [sym, cells] : by_symbol) {
        p.symbols.push_back(sym);
        if (cells.empty()) continue;
        if (!any) {
            first = cells.begin()->first;
            last = cells.rbegin()->first;
            any = true;
        } else {
            first = std::min(first, cells.begin()->first);
            last = std::max(last, cells.rbegin()->first);
        }
    }
    if (!any) throw Error("read_panel_csv: no timestamps in " + path);
    for (std::int64_t ts = first; ts <= last; ts += kSecondsPerHour)
        p.timestamps.push_back(ts);

    const std::int64_t n = p.n_tokens(), t = p.n_hours();
    p.cells.assign(static_cast<std::size_t>(n * t), Candle{});
    p.present.assign(static_cast<std::size_t>(n * t), 0);
    p.labels.assign(static_cast<std::size_t>(n * t), 0);
    std::int64_t i = 0;
    for (auto& [sym, cells] : by_symbol) {
        for (auto& [ts, cell] : cells) {
            std::int64_t h = p.hour_index(ts);
            if (h < 0) throw Error("read_panel_csv: timestamp off grid");
            p.cells[p.idx(i, h)] = cell.candle;
            p.present[p.idx(i, h)] = cell.present ? 1 : 0;
            p.labels[p.idx(i, h)] = cell.label ? 1 : 0;
        }
        ++i;
    }
    return p;
}

std::vector<ScheduleEntry> read_schedule_csv(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty() || lines[0] != "symbol,timestamp_utc")
        throw MalformedRow(1, "schedule CSV header mismatch in " + path);
    std::vector<ScheduleEntry> out;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        if (lines[row].empty()) continue;
        auto f = split_csv(lines[row]);
        if (f.size() != 2)
            throw MalformedRow(row + 1, "schedule row needs symbol,timestamp_utc");
        out.push_back({std::string(f[0]), parse_iso8601(std::string(f[1]))});
    }
    return out;
}

void write_schedule_csv(const std::string& path,
                        const std::vector<ScheduleEntry>& entries) {
    std::string out = "symbol,timestamp_utc\n";
    for (const auto& e : entries)
        out += e.symbol + ',' + format_iso8601(e.raw_time) + '\n';
    write_file(path, out);
}

}  // namespace pumpwatch
