#include "pumpwatch/fetch.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

#include "pumpwatch/errors.hpp"
#include "pumpwatch/timeutil.hpp"

namespace pumpwatch {

namespace {

std::string body_excerpt(const std::string& body) {
    return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

// One GET with retry policy. Returns the response body on HTTP 200.
std::string get_with_retries(httplib::Client& client, const std::string& path,
                             const FetchOptions& opt) {
    int delay_ms = opt.backoff_ms;
    std::string last_error = "no attempt made";
    for (int attempt = 1; attempt <= opt.max_attempts; ++attempt) {
        auto res = client.Get(path);
        if (res && res->status == 200) return res->body;
        bool retryable;
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            retryable = true;
        } else if (res->status == 429) {
            last_error = "rate limited (429)";
            retryable = true;
            // Retry-After is in seconds; zero means retry immediately.
            if (res->has_header("Retry-After")) {
                long ra = std::strtol(res->get_header_value("Retry-After").c_str(),
                                      nullptr, 10);
                delay_ms = static_cast<int>(ra * 1000);
            }
        } else if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status) + ": " +
                         body_excerpt(res->body);
            retryable = true;
        } else {
            throw HttpError("kline request failed with status " +
                            std::to_string(res->status) + ": " + body_excerpt(res->body));
        }
        if (attempt == opt.max_attempts || !retryable) break;
        if (delay_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
    }
    throw HttpError("kline request failed after " + std::to_string(opt.max_attempts) +
                    " attempts; last error: " + last_error);
}

}  // namespace

std::vector<std::string> fetch_klines(const std::string& endpoint,
                                      const std::string& symbol,
                                      std::int64_t start_ts, std::int64_t end_ts,
                                      const FetchOptions& opt) {
    if (end_ts < start_ts)
        throw Error("fetch_klines: end before start");
    httplib::Client client(endpoint);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);

    std::vector<std::string> rows;
    std::int64_t cursor_ms = start_ts * 1000;
    const std::int64_t end_ms = end_ts * 1000;
    while (cursor_ms <= end_ms) {
        std::string path = "/api/v3/klines?symbol=" + symbol +
                           "&interval=1h&startTime=" + std::to_string(cursor_ms) +
                           "&endTime=" + std::to_string(end_ms) +
                           "&limit=" + std::to_string(opt.page_limit);
        std::string body = get_with_retries(client, path, opt);

        nlohmann::json page;
        try {
            page = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            throw HttpError("kline response is not JSON: " + body_excerpt(body));
        }
        if (!page.is_array())
            throw HttpError("kline response is not an array: " + body_excerpt(body));
        if (page.empty()) break;

        std::int64_t last_open_ms = cursor_ms;
        for (const auto& k : page) {
            if (!k.is_array() || k.size() < 11)
                throw HttpError("kline element is not an 11+ field array: " +
                                body_excerpt(k.dump()));
            std::string row;
            for (std::size_t i = 0; i < k.size(); ++i) {
                if (i) row += ',';
                // Numeric fields arrive as JSON numbers or strings; keep the
                // textual form so parse_kline_rows sees exchange-exact values.
                row += k[i].is_string() ? k[i].get<std::string>() : k[i].dump();
            }
            rows.push_back(std::move(row));
            last_open_ms = k[0].get<std::int64_t>();
        }
        if (static_cast<int>(page.size()) < opt.page_limit) break;
        cursor_ms = last_open_ms + kSecondsPerHour * 1000;
    }
    return rows;
}

}  // namespace pumpwatch
