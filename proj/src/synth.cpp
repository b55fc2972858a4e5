#include "pumpwatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/rng.hpp"
#include "pumpwatch/timeutil.hpp"

namespace pumpwatch {

namespace {

constexpr std::int64_t kMinPumpHour = 13;  // 12h rolling stats need warmup
constexpr std::int64_t kPumpSpacing = 8;   // min hours between pumps per token

// Boost profile over a spike's hours (pump or burst): full hit, then a
// fading tail.
constexpr double kStage[3] = {1.0, 0.25, 0.1};

std::string token_symbol(std::int64_t i) {
    std::string num = std::to_string(i);
    return "SYN" + std::string(4 - std::min<std::size_t>(4, num.size()), '0') + num;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_tokens < 2) throw ConfigError("n_tokens must be >= 2");
    if (n_hours < kMinPumpHour + 3) throw ConfigError("n_hours too small for pumps");
    if (n_pumps < 0) throw ConfigError("n_pumps must be >= 0");
    if (n_clusters < 1 || n_clusters > n_tokens)
        throw ConfigError("n_clusters must be in [1, n_tokens]");
    if (trades_mult_lo <= 1.0 || trades_mult_hi < trades_mult_lo)
        throw ConfigError("trades multipliers must satisfy 1 < lo <= hi");
    if (vol_mult_lo <= 1.0 || vol_mult_hi < vol_mult_lo)
        throw ConfigError("volume multipliers must satisfy 1 < lo <= hi");
    if (spillover < 0.0 || spillover >= 1.0)
        throw ConfigError("spillover must be in [0,1)");
    if (price_vol <= 0.0) throw ConfigError("price_vol must be positive");
    if (latent_phi <= -1.0 || latent_phi >= 1.0)
        throw ConfigError("latent_phi must be in (-1,1)");
    if (latent_sigma < 0.0 || idio_sigma < 0.0 || burst_rate < 0.0)
        throw ConfigError("noise parameters must be non-negative");
    if (burst_lo < 0.0 || burst_hi < burst_lo)
        throw ConfigError("burst jitter must satisfy 0 <= lo <= hi");
    if (!is_hour_aligned(start_ts)) throw ConfigError("start_ts must be hour-aligned");

    const std::int64_t usable = n_hours - kMinPumpHour - 2;
    const std::int64_t capacity = n_tokens * (usable / kPumpSpacing + 1);
    if (n_pumps > capacity)
        throw ConfigInfeasible("n_pumps=" + std::to_string(n_pumps) +
                               " exceeds placement capacity " + std::to_string(capacity) +
                               " (" + std::to_string(n_tokens) + " tokens x " +
                               std::to_string(usable) + " usable hours, spacing " +
                               std::to_string(kPumpSpacing) + ")");
}

SynthConfig synth_config_from_kv(const std::map<std::string, std::string>& kv) {
    SynthConfig cfg;
    for (const auto& [k, v] : kv) {
        try {
            if (k == "n_tokens") cfg.n_tokens = std::stoll(v);
            else if (k == "n_hours") cfg.n_hours = std::stoll(v);
            else if (k == "n_pumps") cfg.n_pumps = std::stoll(v);
            else if (k == "n_clusters") cfg.n_clusters = std::stoll(v);
            else if (k == "trades_mult_lo") cfg.trades_mult_lo = std::stod(v);
            else if (k == "trades_mult_hi") cfg.trades_mult_hi = std::stod(v);
            else if (k == "vol_mult_lo") cfg.vol_mult_lo = std::stod(v);
            else if (k == "vol_mult_hi") cfg.vol_mult_hi = std::stod(v);
            else if (k == "spillover") cfg.spillover = std::stod(v);
            else if (k == "drift") cfg.drift = std::stod(v);
            else if (k == "price_vol") cfg.price_vol = std::stod(v);
            else if (k == "latent_phi") cfg.latent_phi = std::stod(v);
            else if (k == "latent_sigma") cfg.latent_sigma = std::stod(v);
            else if (k == "idio_sigma") cfg.idio_sigma = std::stod(v);
            else if (k == "burst_rate") cfg.burst_rate = std::stod(v);
            else if (k == "burst_lo") cfg.burst_lo = std::stod(v);
            else if (k == "burst_hi") cfg.burst_hi = std::stod(v);
            else if (k == "start_ts") cfg.start_ts = std::stoll(v);
            else if (k == "seed") cfg.seed = std::stoull(v);
            else
                throw ConfigError(
                    "unknown synth key '" + k +
                    "' (valid: n_tokens,n_hours,n_pumps,n_clusters,trades_mult_lo,"
                    "trades_mult_hi,vol_mult_lo,vol_mult_hi,spillover,drift,price_vol,"
                    "latent_phi,latent_sigma,idio_sigma,burst_rate,burst_lo,burst_hi,"
                    "start_ts,seed)");
        } catch (const std::invalid_argument&) {
            throw ConfigError("synth key '" + k + "': cannot parse value '" + v + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("synth key '" + k + "': value '" + v + "' out of range");
        }
    }
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> synth_config_to_kv(const SynthConfig& cfg) {
    return {{"n_tokens", fmt_int(cfg.n_tokens)},
            {"n_hours", fmt_int(cfg.n_hours)},
            {"n_pumps", fmt_int(cfg.n_pumps)},
            {"n_clusters", fmt_int(cfg.n_clusters)},
            {"trades_mult_lo", fmt_double(cfg.trades_mult_lo)},
            {"trades_mult_hi", fmt_double(cfg.trades_mult_hi)},
            {"vol_mult_lo", fmt_double(cfg.vol_mult_lo)},
            {"vol_mult_hi", fmt_double(cfg.vol_mult_hi)},
            {"spillover", fmt_double(cfg.spillover)},
            {"drift", fmt_double(cfg.drift)},
            {"price_vol", fmt_double(cfg.price_vol)},
            {"latent_phi", fmt_double(cfg.latent_phi)},
            {"latent_sigma", fmt_double(cfg.latent_sigma)},
            {"idio_sigma", fmt_double(cfg.idio_sigma)},
            {"burst_rate", fmt_double(cfg.burst_rate)},
            {"burst_lo", fmt_double(cfg.burst_lo)},
            {"burst_hi", fmt_double(cfg.burst_hi)},
            {"start_ts", fmt_int(cfg.start_ts)},
            {"seed", fmt_int(static_cast<std::int64_t>(cfg.seed))}};
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    const std::int64_t n = cfg.n_tokens, t_len = cfg.n_hours;
    auto rng = make_rng(cfg.seed, kStreamSynth);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto cluster_of = [&](std::int64_t i) { return i * cfg.n_clusters / n; };
    auto at = [&](std::int64_t i, std::int64_t t) {
        return static_cast<std::size_t>(i * t_len + t);
    };

    // Per-token statics.
    std::vector<double> base_act(n), vol_scale(n), price0(n), base_share(n);
    for (std::int64_t i = 0; i < n; ++i) {
        base_act[i] = 4.0 + 0.6 * normal(rng);
        vol_scale[i] = std::exp(2.0 + 0.8 * normal(rng));
        price0[i] = std::exp(-3.0 + 1.5 * normal(rng));
        base_share[i] = std::clamp(0.5 + 0.08 * normal(rng), 0.05, 0.9);
    }

    // Cluster-shared latent log-activity.
    std::vector<double> latent(static_cast<std::size_t>(cfg.n_clusters * t_len), 0.0);
    for (std::int64_t c = 0; c < cfg.n_clusters; ++c) {
        double l = 0.0;
        for (std::int64_t t = 0; t < t_len; ++t) {
            l = cfg.latent_phi * l + cfg.latent_sigma * normal(rng);
            latent[static_cast<std::size_t>(c * t_len + t)] = l;
        }
    }

    // Per-(token, hour) primitives. Pump and burst edits multiply on top.
    std::vector<double> act(at(n - 1, t_len - 1) + 1), ret(act.size()),
        share(act.size()), heps(act.size()), leps(act.size()), vnoise(act.size());
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t c = cluster_of(i);
        for (std::int64_t t = 0; t < t_len; ++t) {
            const double shared = latent[static_cast<std::size_t>(c * t_len + t)];
            act[at(i, t)] = base_act[i] + shared + cfg.idio_sigma * normal(rng);
            ret[at(i, t)] = cfg.drift + cfg.price_vol * normal(rng);
            share[at(i, t)] = std::clamp(base_share[i] + 0.06 * normal(rng), 0.02, 0.95);
            heps[at(i, t)] = std::abs(normal(rng)) * 0.006;
            leps[at(i, t)] = std::min(0.2, std::abs(normal(rng)) * 0.006);
            vnoise[at(i, t)] = std::exp(0.15 * normal(rng));
        }
    }

    // Unlabeled cluster-wide hype bursts. Each one draws from the SAME
    // multiplier ranges as a pump and plays the same staged profile, but
    // hits every member of the cluster (with per-member jitter) and fades
    // without a dump. Marginally a burst hour is indistinguishable from a
    // pump hour on the spiking token itself.
    std::vector<double> trades_mult(act.size(), 1.0), vol_mult(act.size(), 1.0);
    std::uniform_real_distribution<double> trades_pick(cfg.trades_mult_lo,
                                                       cfg.trades_mult_hi);
    std::uniform_real_distribution<double> vol_pick(cfg.vol_mult_lo, cfg.vol_mult_hi);
    std::uniform_real_distribution<double> jitter_pick(cfg.burst_lo, cfg.burst_hi);
    for (std::int64_t c = 0; c < cfg.n_clusters; ++c) {
        std::int64_t cool_until = 0;
        for (std::int64_t t = 1; t < t_len - 3; ++t) {
            if (t < cool_until || unit(rng) >= cfg.burst_rate) continue;
            const double mt = trades_pick(rng);
            const double mv = vol_pick(rng);
            std::int64_t duration = 1 + static_cast<std::int64_t>(unit(rng) * 3.0);
            if (duration > 3) duration = 3;
            for (std::int64_t j = 0; j < n; ++j) {
                if (cluster_of(j) != c) continue;
                const double jit = jitter_pick(rng);
                for (std::int64_t d = 0; d < duration; ++d) {
                    const double s = kStage[d] * jit;
                    const std::size_t cell = at(j, t + d);
                    trades_mult[cell] *= 1.0 + (mt - 1.0) * s;
                    vol_mult[cell] *= 1.0 + (mv - 1.0) * s;
                    share[cell] = std::min(0.95, share[cell] * (1.0 + 0.8 * s));
                    ret[cell] += 0.08 * s;
                }
            }
            cool_until = t + duration + kPumpSpacing;
        }
    }

    // Pump placement: uniform rejection sampling with a per-token spacing
    // floor so spikes never blur into each other.
    std::vector<std::vector<std::int64_t>> taken(static_cast<std::size_t>(n));
    std::vector<SynthEvent> events;
    std::uniform_int_distribution<std::int64_t> pick_token(0, n - 1);
    std::uniform_int_distribution<std::int64_t> pick_hour(kMinPumpHour, t_len - 3);
    for (std::int64_t k = 0; k < cfg.n_pumps; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const std::int64_t i = pick_token(rng);
            const std::int64_t t = pick_hour(rng);
            bool clash = false;
            for (std::int64_t other : taken[static_cast<std::size_t>(i)])
                if (std::llabs(other - t) < kPumpSpacing) { clash = true; break; }
            if (clash) continue;
            taken[static_cast<std::size_t>(i)].push_back(t);
            SynthEvent ev;
            ev.token = i;
            ev.symbol = token_symbol(i);
            ev.ts = cfg.start_ts + t * kSecondsPerHour;
            ev.cluster = cluster_of(i);
            ev.spike_factor =
                cfg.trades_mult_lo + (cfg.trades_mult_hi - cfg.trades_mult_lo) * unit(rng);
            ev.duration = 1 + static_cast<std::int64_t>(unit(rng) * 3.0);
            if (ev.duration > 3) ev.duration = 3;
            events.push_back(std::move(ev));
            placed = true;
        }
        if (!placed)
            throw ConfigInfeasible("could not place pump " + std::to_string(k + 1) +
                                   " of " + std::to_string(cfg.n_pumps) +
                                   " after 1000 attempts");
    }

    // Apply pump edits: activity/volume multipliers, buy-pressure shift,
    // a price run-up during the spike and a partial dump right after.
    for (SynthEvent& ev : events) {
        const std::int64_t t0 = (ev.ts - cfg.start_ts) / kSecondsPerHour;
        const double mv = vol_pick(rng);
        double added_ret = 0.0;
        for (std::int64_t d = 0; d < ev.duration && t0 + d < t_len; ++d) {
            const double s = kStage[d];
            const std::size_t cell = at(ev.token, t0 + d);
            trades_mult[cell] *= 1.0 + (ev.spike_factor - 1.0) * s;
            vol_mult[cell] *= 1.0 + (mv - 1.0) * s;
            share[cell] = std::min(0.95, share[cell] * (1.0 + 0.8 * s));
            ret[cell] += 0.08 * s;
            added_ret += 0.08 * s;
            // faint spillover onto cluster partners
            for (std::int64_t j = 0; j < n; ++j) {
                if (j == ev.token || cluster_of(j) != ev.cluster) continue;
                const std::size_t pc = at(j, t0 + d);
                trades_mult[pc] *= 1.0 + (ev.spike_factor - 1.0) * cfg.spillover * s;
                vol_mult[pc] *= 1.0 + (mv - 1.0) * cfg.spillover * s;
            }
        }
        if (t0 + ev.duration < t_len) ret[at(ev.token, t0 + ev.duration)] -= 0.9 * added_ret;
    }

    // Materialize candles.
    std::vector<CandleSeries> series(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        CandleSeries& cs = series[static_cast<std::size_t>(i)];
        cs.symbol = token_symbol(i);
        cs.candles.resize(static_cast<std::size_t>(t_len));
        double prev_close = price0[i];
        for (std::int64_t t = 0; t < t_len; ++t) {
            Candle& cd = cs.candles[static_cast<std::size_t>(t)];
            const std::size_t cell = at(i, t);
            cd.open_time = cfg.start_ts + t * kSecondsPerHour;
            cd.open = prev_close;
            cd.close = prev_close * std::exp(ret[cell]);
            cd.high = std::max(cd.open, cd.close) * (1.0 + heps[cell]);
            cd.low = std::min(cd.open, cd.close) * (1.0 - leps[cell]);
            cd.volume = vol_scale[i] * std::exp(act[cell] - base_act[i]) *
                        vnoise[cell] * vol_mult[cell];
            cd.quote_asset_volume = cd.volume * 0.5 * (cd.open + cd.close);
            cd.num_trades = std::max<std::int64_t>(
                1, std::llround(std::exp(act[cell]) * trades_mult[cell]));
            cd.taker_buy_base = share[cell] * cd.volume;
            cd.taker_buy_quote = share[cell] * cd.quote_asset_volume;
            prev_close = cd.close;
        }
    }

    std::vector<ScheduleEntry> schedule;
    for (const SynthEvent& ev : events) schedule.push_back({ev.symbol, ev.ts});

    std::sort(events.begin(), events.end(), [](const SynthEvent& a, const SynthEvent& b) {
        return a.ts != b.ts ? a.ts < b.ts : a.token < b.token;
    });

    SynthResult out;
    out.panel = assemble_panel(std::move(series), schedule);
    out.events = std::move(events);
    return out;
}

void write_truth_csv(const std::string& path, const std::vector<SynthEvent>& events) {
    std::string out = "symbol,timestamp_utc,cluster,spike_factor\n";
    for (const SynthEvent& ev : events)
        out += ev.symbol + "," + format_iso8601(ev.ts) + "," + fmt_int(ev.cluster) +
               "," + fmt_double(ev.spike_factor) + "\n";
    write_file(path, out);
}

}  // namespace pumpwatch
