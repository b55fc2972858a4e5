#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pumpwatch {

struct FetchOptions {
    int page_limit = 1000;      // rows per request, exchange maximum
    int max_attempts = 3;       // per page, transient failures only
    int backoff_ms = 500;       // first retry delay, doubles per attempt
};

// Download 1h klines for [start_ts, end_ts] (epoch seconds, inclusive) from a
// spot-style endpoint (GET <endpoint>/api/v3/klines?symbol=&interval=1h&
// startTime=&endTime=&limit=). Returns raw comma-joined rows in the layout
// parse_kline_rows expects. Paginates, retries transient failures with
// exponential backoff, and honors Retry-After on 429 responses.
// Throws HttpError with status and a body excerpt on hard failures.
std::vector<std::string> fetch_klines(const std::string& endpoint,
                                      const std::string& symbol,
                                      std::int64_t start_ts, std::int64_t end_ts,
                                      const FetchOptions& opt = {});

}  // namespace pumpwatch
