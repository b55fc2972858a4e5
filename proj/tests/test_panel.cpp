#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/kline.hpp"
#include "pumpwatch/panel.hpp"
#include "pumpwatch/timeutil.hpp"

using namespace pumpwatch;

namespace {

constexpr std::int64_t kT0 = 1609459200;  // 2021-01-01T00:00:00Z

Candle simple_candle(std::int64_t ts, double px, double vol) {
    Candle c;
    c.open_time = ts;
    c.open = px;
    c.high = px * 1.01;
    c.low = px * 0.99;
    c.close = px * 1.005;
    c.volume = vol;
    c.quote_asset_volume = vol * px;
    c.num_trades = static_cast<std::int64_t>(vol);
    c.taker_buy_base = vol * 0.4;
    c.taker_buy_quote = vol * px * 0.4;
    return c;
}

// Token covering a contiguous hour range of the shared grid.
CandleSeries series_between(const std::string& symbol, std::int64_t h_begin,
                            std::int64_t h_end, double px) {
    CandleSeries s;
    s.symbol = symbol;
    for (std::int64_t h = h_begin; h < h_end; ++h)
        s.candles.push_back(simple_candle(kT0 + h * kSecondsPerHour, px, 100.0 + static_cast<double>(h)));
    return s;
}

Panel grid_panel(std::int64_t n_tokens, std::int64_t n_hours) {
    std::vector<CandleSeries> all;
    for (std::int64_t i = 0; i < n_tokens; ++i)
        all.push_back(series_between("TK" + std::to_string(i), 0, n_hours, 1.0 + static_cast<double>(i)));
    return assemble_panel(std::move(all), {});
}

}  // namespace

/* ---- time handling ---- */

TEST_CASE("pump times snap to the nearest hour, half past rounds up") {
    CHECK(snap_pump_time(kT0) == kT0);
    CHECK(snap_pump_time(kT0 + 1799) == kT0);                       // 00:29:59 down
    CHECK(snap_pump_time(kT0 + 1800) == kT0 + kSecondsPerHour);     // 00:30:00 up
    CHECK(snap_pump_time(kT0 + 1801) == kT0 + kSecondsPerHour);
    CHECK(snap_pump_time(kT0 + 3599) == kT0 + kSecondsPerHour);
}

TEST_CASE("iso8601 parse/format round-trips and rejects junk") {
    CHECK(parse_iso8601("2021-01-01T00:00:00Z") == kT0);
    CHECK(format_iso8601(kT0) == "2021-01-01T00:00:00Z");
    CHECK(parse_iso8601(format_iso8601(kT0 + 987 * kSecondsPerHour)) ==
          kT0 + 987 * kSecondsPerHour);
    CHECK(hour_of_day(kT0 + 13 * kSecondsPerHour) == 13);
    CHECK_THROWS_AS(parse_iso8601("2021-01-01 00:00:00"), Error);
    CHECK_THROWS_AS(parse_iso8601("2021-13-01T00:00:00Z"), Error);
    CHECK_THROWS_AS(parse_iso8601("not a date"), Error);
}

/* ---- kline parsing ---- */

TEST_CASE("kline rows parse, sort, and reject malformed input") {
    const std::vector<std::string> rows = {
        "1609462800000,2.0,2.2,1.9,2.1,500,1609466399999,1050,42,200,420,0",
        "1609459200000,1.0,1.2,0.9,1.1,300,1609462799999,330,17,120,132,0",
    };
    CandleSeries s = parse_kline_rows(rows, "ABCUSDT");
    REQUIRE(s.candles.size() == 2);
    CHECK(s.symbol == "ABCUSDT");
    CHECK(s.candles[0].open_time == kT0);  // re-sorted ascending
    CHECK(s.candles[0].open == 1.0);
    CHECK(s.candles[0].num_trades == 17);
    CHECK(s.candles[1].taker_buy_quote == 420);

    CHECK_THROWS_AS(parse_kline_rows({"1609459200000,1.0,bogus,0.9,1.1,300,1,330,17,120,132"},
                                     "X"),
                    MalformedRow);
    CHECK_THROWS_AS(parse_kline_rows({"1609459200000,1.0"}, "X"), MalformedRow);
    CHECK_THROWS_AS(parse_kline_rows({rows[0], rows[0]}, "X"), DuplicateTimestamp);
    // 1-based row number lands in the message
    try {
        parse_kline_rows({rows[0], "garbage"}, "X");
        FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
        CHECK(e.row_number == 2);
    }
}

/* ---- panel assembly ---- */

TEST_CASE("assemble_panel builds the union grid with sorted tokens") {
    std::vector<CandleSeries> series;
    series.push_back(series_between("ZETA", 0, 5, 2.0));   // hours 0-4
    series.push_back(series_between("ALPHA", 2, 8, 1.0));  // hours 2-7
    std::vector<ScheduleEntry> schedule = {
        {"ZETA", kT0 + 3 * kSecondsPerHour + 1700},  // snaps down to hour 3
    };
    Panel p = assemble_panel(std::move(series), schedule);

    CHECK(p.symbols == std::vector<std::string>{"ALPHA", "ZETA"});
    CHECK(p.n_hours() == 8);  // union of [0,5) and [2,8)
    CHECK(p.timestamps.front() == kT0);
    CHECK(p.timestamps.back() == kT0 + 7 * kSecondsPerHour);

    // ALPHA (token 0) missing before hour 2; ZETA (token 1) missing from hour 5.
    CHECK_FALSE(p.present[p.idx(0, 0)]);
    CHECK(p.present[p.idx(0, 2)]);
    CHECK(p.present[p.idx(1, 0)]);
    CHECK_FALSE(p.present[p.idx(1, 6)]);

    CHECK(p.labels[p.idx(1, 3)] == 1);
    std::int64_t labeled = 0;
    for (auto f : p.labels) labeled += f;
    CHECK(labeled == 1);

    REQUIRE(p.events.size() == 1);
    CHECK(p.events[0].token_id == 1);
    CHECK(p.events[0].snapped_time == kT0 + 3 * kSecondsPerHour);

    CHECK(p.hour_index(kT0 + 5 * kSecondsPerHour) == 5);
    CHECK(p.hour_index(kT0 + 5 * kSecondsPerHour + 1) == -1);
    CHECK(p.hour_index(kT0 - kSecondsPerHour) == -1);
}

TEST_CASE("assemble_panel rejects off-grid and unknown-symbol events") {
    auto mk = [] {
        std::vector<CandleSeries> s;
        s.push_back(series_between("AAA", 0, 4, 1.0));
        return s;
    };
    // Snapped time lands after the grid ends.
    CHECK_THROWS_AS(assemble_panel(mk(), {{"AAA", kT0 + 9 * kSecondsPerHour}}), EventOffGrid);
    CHECK_THROWS_AS(assemble_panel(mk(), {{"NOPE", kT0}}), EventOffGrid);
}

/* ---- chronological split ---- */

TEST_CASE("split matches the enumerated oracle on the acceptance geometry") {
    Panel p = grid_panel(2, 100);
    SplitIndex s = chronological_split(p, 0.6, 0.2, 5);
    const auto want = oracle::split_ranges(100, 0.6, 0.2, 5);

    CHECK(s.train_begin == want.train_begin);
    CHECK(s.train_end == want.train_end);
    CHECK(s.val_begin == want.val_begin);
    CHECK(s.val_end == want.val_end);
    CHECK(s.test_begin == want.test_begin);
    CHECK(s.test_end == want.test_end);

    // Hours 1..60 train, 66..80 validation, 86..100 test (1-based).
    CHECK(s.train_begin == 0);
    CHECK(s.train_end == 60);
    CHECK(s.val_begin == 65);
    CHECK(s.val_end == 80);
    CHECK(s.test_begin == 85);
    CHECK(s.test_end == 100);

    REQUIRE(s.train_ts.size() == 60);
    REQUIRE(s.val_ts.size() == 15);
    REQUIRE(s.test_ts.size() == 15);
    CHECK(s.train_ts.front() == p.timestamps[0]);
    CHECK(s.train_ts.back() == p.timestamps[59]);
    CHECK(s.val_ts.front() == p.timestamps[65]);
    CHECK(s.test_ts.front() == p.timestamps[85]);
    CHECK(s.test_ts.back() == p.timestamps[99]);
    CHECK(s.embargo_hours == 5);

    // No timestamp appears in two blocks and embargoed hours are nowhere.
    for (auto t : s.val_ts) {
        CHECK(t > s.train_ts.back());
        CHECK(t - s.train_ts.back() > 5 * kSecondsPerHour);
    }
    for (auto t : s.test_ts) CHECK(t - s.val_ts.back() > 5 * kSecondsPerHour);
}

TEST_CASE("split arithmetic holds across sizes") {
    for (std::int64_t T : {50, 73, 101, 240}) {
        Panel p = grid_panel(1, T);
        SplitIndex s = chronological_split(p, 0.6, 0.2, 5);
        const auto want = oracle::split_ranges(T, 0.6, 0.2, 5);
        CHECK(s.train_end == want.train_end);
        CHECK(s.val_begin == want.val_begin);
        CHECK(s.val_end == want.val_end);
        CHECK(s.test_begin == want.test_begin);
        CHECK(s.test_end == want.test_end);
    }
}

TEST_CASE("degenerate splits throw") {
    Panel tiny = grid_panel(1, 12);
    // Raw validation block is floor(0.2*12) = 2 hours, swallowed by the embargo.
    CHECK_THROWS_AS(chronological_split(tiny, 0.6, 0.2, 5), PanelTooShort);
    CHECK_THROWS_AS(chronological_split(grid_panel(1, 30), 0.9, 0.05, 5), PanelTooShort);
    Panel p = grid_panel(1, 100);
    CHECK_THROWS_AS(chronological_split(p, -0.1, 0.2, 5), ConfigError);
    CHECK_THROWS_AS(chronological_split(p, 0.6, 0.5, 5), ConfigError);
    CHECK_THROWS_AS(chronological_split(p, 0.6, 0.2, -1), ConfigError);
}

/* ---- csv round-trips ---- */

TEST_CASE("panel csv write/read is bit-exact including gaps and flags") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pumpwatch_panel_test";
    fs::create_directories(dir);
    const std::string path = (dir / "panel.csv").string();

    std::vector<CandleSeries> series;
    series.push_back(series_between("BBB", 0, 6, 0.123456789123));
    series.push_back(series_between("AAA", 3, 9, 7.5e-7));
    Panel p = assemble_panel(std::move(series), {{"BBB", kT0 + 2 * kSecondsPerHour}});

    write_panel_csv(path, p);
    Panel q = read_panel_csv(path);

    CHECK(q.symbols == p.symbols);
    CHECK(q.timestamps == p.timestamps);
    CHECK(q.present == p.present);
    CHECK(q.labels == p.labels);
    REQUIRE(q.cells.size() == p.cells.size());
    for (std::size_t k = 0; k < p.cells.size(); ++k) {
        if (!p.present[k]) continue;
        CHECK(q.cells[k].open == p.cells[k].open);
        CHECK(q.cells[k].high == p.cells[k].high);
        CHECK(q.cells[k].low == p.cells[k].low);
        CHECK(q.cells[k].close == p.cells[k].close);
        CHECK(q.cells[k].volume == p.cells[k].volume);
        CHECK(q.cells[k].quote_asset_volume == p.cells[k].quote_asset_volume);
        CHECK(q.cells[k].num_trades == p.cells[k].num_trades);
        CHECK(q.cells[k].taker_buy_base == p.cells[k].taker_buy_base);
        CHECK(q.cells[k].taker_buy_quote == p.cells[k].taker_buy_quote);
    }

    // A second write of the re-read panel is byte-identical.
    const std::string path2 = (dir / "panel2.csv").string();
    write_panel_csv(path2, q);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
}

TEST_CASE("schedule csv round-trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pumpwatch_panel_test";
    fs::create_directories(dir);
    const std::string path = (dir / "schedule.csv").string();

    std::vector<ScheduleEntry> entries = {
        {"AAA", kT0 + 3 * kSecondsPerHour},
        {"BBB", kT0 + 100 * kSecondsPerHour},
    };
    write_schedule_csv(path, entries);
    auto back = read_schedule_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].symbol == "AAA");
    CHECK(back[0].raw_time == entries[0].raw_time);
    CHECK(back[1].raw_time == entries[1].raw_time);
}
