#pragma once

// Deterministic, closed-form forcing and disturbance signals. Every signal
// carries JSON metadata holding its *realized* parameters (frequencies,
// levels, ...), so rebuilding from metadata reproduces evaluations exactly.

#include "rcdetect/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

namespace rcdetect {

using json = nlohmann::json;

/// Piecewise-constant schedule. edges has one more entry than levels;
/// interval k is [edges[k], edges[k+1]). Before edges.front() the value is 0,
/// at and beyond edges.back() the final level is held.
struct StepSchedule {
    std::vector<double> edges;
    std::vector<double> levels;

    double eval(double t) const {
        if (levels.empty() || t < edges.front()) return 0.0;
        if (t >= edges.back()) return levels.back();
        const auto it = std::upper_bound(edges.begin(), edges.end(), t);
        return levels[static_cast<std::size_t>(it - edges.begin()) - 1];
    }
    void validate() const {
        require(edges.size() == levels.size() + 1, "StepSchedule: edges must have levels+1 entries");
        require(std::is_sorted(edges.begin(), edges.end()), "StepSchedule: edges must be increasing");
    }
};

/// A deterministic vector-valued function of time. Channels are 0-based in
/// the C++ API; serialized metadata uses 1-based channel numbers.
class Signal {
public:
    using Fn = std::function<double(double)>;

    Signal() = default;

    static Signal zero(int channels) {
        Signal s;
        s.n_ = channels;
        s.fn_.assign(static_cast<std::size_t>(channels), nullptr);
        s.meta_ = {{"type", "zero"}, {"channels", channels}};
        return s;
    }

    int channels() const { return n_; }

    void eval_into(double t, Eigen::Ref<Vec> out) const {
        require(out.size() == n_, "Signal::eval_into: output size mismatch");
        for (int i = 0; i < n_; ++i) out[i] = fn_[static_cast<std::size_t>(i)] ? fn_[static_cast<std::size_t>(i)](t) : 0.0;
    }
    Vec eval(double t) const {
        Vec v(n_);
        eval_into(t, v);
        return v;
    }

    /// Channels that can take a nonzero value (0-based, sorted).
    const std::vector<int>& support() const { return support_; }

    /// Per-channel evaluator; null for structurally zero channels.
    const Fn& channel_fn(int i) const { return fn_[static_cast<std::size_t>(i)]; }

    const json& metadata() const { return meta_; }
    std::string description() const { return meta_.value("description", meta_.value("type", "signal")); }

    static Signal from_metadata(const json& meta);

    /// Internal constructor used by the factories below.
    static Signal from_channels(int channels, json meta, std::vector<std::pair<int, Fn>> chans) {
        Signal s;
        s.n_ = channels;
        s.fn_.assign(static_cast<std::size_t>(channels), nullptr);
        for (auto& [idx, fn] : chans) {
            require(idx >= 0 && idx < channels, "Signal: channel index out of range");
            s.fn_[static_cast<std::size_t>(idx)] = std::move(fn);
            s.support_.push_back(idx);
        }
        std::sort(s.support_.begin(), s.support_.end());
        s.support_.erase(std::unique(s.support_.begin(), s.support_.end()), s.support_.end());
        s.meta_ = std::move(meta);
        return s;
    }

private:
    int n_ = 0;
    std::vector<Fn> fn_;
    std::vector<int> support_;
    json meta_;
};

/// Maps signal channels onto flat state indices (e.g. the excitatory slot of
/// each pair). Owned by the detector configuration.
struct ChannelMap {
    std::vector<int> state_index;  // per signal channel, 0-based
    int state_size = 0;

    int channels() const { return static_cast<int>(state_index.size()); }

    static ChannelMap identity(int n) {
        ChannelMap m;
        m.state_size = n;
        m.state_index.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) m.state_index[static_cast<std::size_t>(i)] = i;
        return m;
    }
    /// Channel i -> flat index of E_i in an interleaved [E_1,I_1,...] state.
    static ChannelMap wc_excitatory(int pairs) {
        ChannelMap m;
        m.state_size = 2 * pairs;
        m.state_index.resize(static_cast<std::size_t>(pairs));
        for (int i = 0; i < pairs; ++i) m.state_index[static_cast<std::size_t>(i)] = 2 * i;
        return m;
    }
    /// Node owning signal channel c, for a model with dim d per node.
    int node_of(int channel, int dim_per_node) const {
        return state_index[static_cast<std::size_t>(channel)] / dim_per_node;
    }
    json to_json() const {
        json idx = json::array();
        for (int s : state_index) idx.push_back(s + 1);
        return {{"state_size", state_size}, {"state_index", idx}};
    }
    static ChannelMap from_json(const json& j) {
        ChannelMap m;
        m.state_size = j.at("state_size").get<int>();
        for (const auto& v : j.at("state_index")) m.state_index.push_back(v.get<int>() - 1);
        return m;
    }
};

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

inline Signal sinusoid_bank_explicit(double amplitude, const std::vector<double>& freqs) {
    json meta = {{"type", "sinusoids"}, {"amplitude", amplitude}, {"frequencies", freqs}};
    std::vector<std::pair<int, Signal::Fn>> chans;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const double w = freqs[i];
        if (amplitude != 0.0)
            chans.emplace_back(static_cast<int>(i), [amplitude, w](double t) { return amplitude * std::sin(w * t); });
    }
    return Signal::from_channels(static_cast<int>(freqs.size()), std::move(meta), std::move(chans));
}

/// Channel i evaluates to amplitude*sin(w_i t), w_i ~ U[freq_low, freq_high).
inline Signal sinusoid_bank(int channels, double amplitude, double freq_low, double freq_high,
                            std::uint64_t seed) {
    require(freq_low < freq_high, "sinusoid_bank: freq_low must be < freq_high");
    Rng rng(seed);
    std::vector<double> freqs(static_cast<std::size_t>(channels));
    for (auto& w : freqs) w = rng.uniform(freq_low, freq_high);
    return sinusoid_bank_explicit(amplitude, freqs);
}

inline Signal step_schedule_explicit(std::vector<StepSchedule> schedules) {
    json scheds = json::array();
    std::vector<std::pair<int, Signal::Fn>> chans;
    for (std::size_t i = 0; i < schedules.size(); ++i) {
        schedules[i].validate();
        scheds.push_back({{"edges", schedules[i].edges}, {"levels", schedules[i].levels}});
        const bool nonzero = std::any_of(schedules[i].levels.begin(), schedules[i].levels.end(),
                                         [](double v) { return v != 0.0; });
        if (nonzero) {
            StepSchedule sch = schedules[i];
            chans.emplace_back(static_cast<int>(i), [sch = std::move(sch)](double t) { return sch.eval(t); });
        }
    }
    json meta = {{"type", "steps"}, {"channels", schedules.size()}, {"schedules", std::move(scheds)}};
    return Signal::from_channels(static_cast<int>(schedules.size()), std::move(meta), std::move(chans));
}

/// Independent per-channel random step schedules over [0, n_intervals*len);
/// the final level is held beyond the schedule end.
inline Signal random_steps(int channels, int n_intervals, double interval_length,
                           double level_low, double level_high, std::uint64_t seed) {
    require(n_intervals >= 1, "random_steps: need at least one interval");
    require(interval_length > 0, "random_steps: interval_length must be positive");
    Rng rng(seed);
    std::vector<StepSchedule> scheds(static_cast<std::size_t>(channels));
    for (auto& s : scheds) {
        s.edges.resize(static_cast<std::size_t>(n_intervals) + 1);
        for (int k = 0; k <= n_intervals; ++k) s.edges[static_cast<std::size_t>(k)] = k * interval_length;
        s.levels.resize(static_cast<std::size_t>(n_intervals));
        for (auto& v : s.levels) v = rng.uniform(level_low, level_high);
    }
    return step_schedule_explicit(std::move(scheds));
}

struct HeavisidePulse {
    int channel = 0;  // 0-based
    double t_on = 0;
    std::optional<double> t_off;  // absent: stays on
    double level = 0;
};

/// Channel value is 0 before t_on, level on [t_on, t_off), 0 after; channels
/// without a pulse are identically zero.
inline Signal heaviside(int channels, const std::vector<HeavisidePulse>& pulses) {
    json jp = json::array();
    std::vector<std::pair<int, Signal::Fn>> chans;
    for (const auto& p : pulses) {
        if (p.t_off) require(p.t_on < *p.t_off, "heaviside: t_on must be < t_off");
        json e = {{"channel", p.channel + 1}, {"t_on", p.t_on}, {"level", p.level}};
        if (p.t_off) e["t_off"] = *p.t_off;
        jp.push_back(std::move(e));
        chans.emplace_back(p.channel, [p](double t) {
            if (t < p.t_on) return 0.0;
            if (p.t_off && t >= *p.t_off) return 0.0;
            return p.level;
        });
    }
    json meta = {{"type", "heaviside"}, {"channels", channels}, {"pulses", std::move(jp)}};
    return Signal::from_channels(channels, std::move(meta), std::move(chans));
}

/// 8-channel bank with g_3(t) = 0.3 sin(2t) + 0.3 sin(pi t) and
/// g_5(t) = sin(2 pi sin(t/2)) (1-based channel numbering), others zero.
inline Signal lv_pseudo_sinusoids() {
    json meta = {{"type", "pseudo_sinusoid_pair"}, {"channels", 8}};
    std::vector<std::pair<int, Signal::Fn>> chans;
    chans.emplace_back(2, [](double t) { return 0.3 * std::sin(2.0 * t) + 0.3 * std::sin(M_PI * t); });
    chans.emplace_back(4, [](double t) { return std::sin(2.0 * M_PI * std::sin(t / 2.0)); });
    return Signal::from_channels(8, std::move(meta), std::move(chans));
}

struct LogisticRamp {
    double amplitude = 0;
    double center = 0;
    double width = 1;
    double eval(double t) const { return amplitude / (1.0 + std::exp(-(t - center) / width)); }
};

/// Sum of two logistic ramps on one channel: a dip followed by a rise.
inline Signal composed_sigmoid_disturbance(int channels = 4, int channel = 0,
                                           LogisticRamp drop = {-0.5, 150.0, 30.0},
                                           LogisticRamp rise = {1.0, 300.0, 30.0}) {
    json meta = {{"type", "composed_sigmoid"},
                 {"channels", channels},
                 {"channel", channel + 1},
                 {"drop", {{"amplitude", drop.amplitude}, {"center", drop.center}, {"width", drop.width}}},
                 {"rise", {{"amplitude", rise.amplitude}, {"center", rise.center}, {"width", rise.width}}}};
    std::vector<std::pair<int, Signal::Fn>> chans;
    chans.emplace_back(channel, [drop, rise](double t) { return drop.eval(t) + rise.eval(t); });
    return Signal::from_channels(channels, std::move(meta), std::move(chans));
}

struct MixedSineEntry {
    int channel = 0;  // 0-based
    int form = 1;     // 1: u1 sin(u2 t) + u1 sin(u3 t); 2: u1 sin(u4 sin(u2 t))
    double u1 = 0, u2 = 0, u3 = 0, u4 = 0;
};

inline Signal mixed_sine_ensemble_explicit(int channels, const std::vector<MixedSineEntry>& entries) {
    json je = json::array();
    std::vector<std::pair<int, Signal::Fn>> chans;
    for (const auto& e : entries) {
        require(e.form == 1 || e.form == 2, "mixed_sine_ensemble: form must be 1 or 2");
        je.push_back({{"channel", e.channel + 1}, {"form", e.form},
                      {"u1", e.u1}, {"u2", e.u2}, {"u3", e.u3}, {"u4", e.u4}});
        if (e.form == 1)
            chans.emplace_back(e.channel, [e](double t) { return e.u1 * std::sin(e.u2 * t) + e.u1 * std::sin(e.u3 * t); });
        else
            chans.emplace_back(e.channel, [e](double t) { return e.u1 * std::sin(e.u4 * std::sin(e.u2 * t)); });
    }
    json meta = {{"type", "mixed_sines"}, {"channels", channels}, {"entries", std::move(je)}};
    return Signal::from_channels(channels, std::move(meta), std::move(chans));
}

/// Disturbs round(fraction*N) channels, chosen without replacement. Each
/// disturbed channel independently draws one of two sinusoid compositions and
/// its u-parameters; the ground-truth channel set is in the metadata.
inline Signal random_disturbance_ensemble(int channels, double fraction_disturbed, std::uint64_t seed) {
    require(fraction_disturbed >= 0.0 && fraction_disturbed <= 1.0,
            "random_disturbance_ensemble: fraction must be in [0,1]");
    Rng rng(seed);
    const int k = static_cast<int>(std::lround(fraction_disturbed * channels));
    std::vector<int> all(static_cast<std::size_t>(channels));
    for (int i = 0; i < channels; ++i) all[static_cast<std::size_t>(i)] = i;
    rng.shuffle(all);
    std::vector<int> chosen(all.begin(), all.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    std::vector<MixedSineEntry> entries;
    for (int c : chosen) {
        MixedSineEntry e;
        e.channel = c;
        e.u1 = rng.uniform(0.2, 0.4);
        e.u2 = rng.uniform(1.0, 2.0);
        e.u3 = rng.uniform(M_PI / 2.0, M_PI);
        e.u4 = rng.uniform(M_PI, 2.0 * M_PI);
        e.form = rng.uniform01() < 0.5 ? 1 : 2;
        entries.push_back(e);
    }
    return mixed_sine_ensemble_explicit(channels, entries);
}

/// Widens a signal to state width: mapped channel values land on their state
/// indices, everything else is structurally zero.
inline Signal expand(const Signal& inner, const ChannelMap& map) {
    require(inner.channels() == map.channels(), "expand: signal/channel-map width mismatch");
    json meta = {{"type", "mapped"}, {"map", map.to_json()}, {"inner", inner.metadata()}};
    std::vector<std::pair<int, Signal::Fn>> chans;
    for (int c : inner.support()) {
        const int idx = map.state_index[static_cast<std::size_t>(c)];
        chans.emplace_back(idx, inner.channel_fn(c));
    }
    return Signal::from_channels(map.state_size, std::move(meta), std::move(chans));
}

inline Signal Signal::from_metadata(const json& meta) {
    const std::string type = meta.at("type").get<std::string>();
    if (type == "zero") return Signal::zero(meta.at("channels").get<int>());
    if (type == "sinusoids")
        return sinusoid_bank_explicit(meta.at("amplitude").get<double>(),
                                      meta.at("frequencies").get<std::vector<double>>());
    if (type == "steps") {
        std::vector<StepSchedule> scheds;
        for (const auto& s : meta.at("schedules"))
            scheds.push_back({s.at("edges").get<std::vector<double>>(),
                              s.at("levels").get<std::vector<double>>()});
        return step_schedule_explicit(std::move(scheds));
    }
    if (type == "heaviside") {
        std::vector<HeavisidePulse> pulses;
        for (const auto& p : meta.at("pulses")) {
            HeavisidePulse h;
            h.channel = p.at("channel").get<int>() - 1;
            h.t_on = p.at("t_on").get<double>();
            h.level = p.at("level").get<double>();
            if (p.contains("t_off")) h.t_off = p.at("t_off").get<double>();
            pulses.push_back(h);
        }
        return heaviside(meta.at("channels").get<int>(), pulses);
    }
    if (type == "pseudo_sinusoid_pair") return lv_pseudo_sinusoids();
    if (type == "composed_sigmoid") {
        auto ramp = [](const json& j) {
            return LogisticRamp{j.at("amplitude").get<double>(), j.at("center").get<double>(),
                                j.at("width").get<double>()};
        };
        return composed_sigmoid_disturbance(meta.at("channels").get<int>(),
                                            meta.at("channel").get<int>() - 1,
                                            ramp(meta.at("drop")), ramp(meta.at("rise")));
    }
    if (type == "mixed_sines") {
        std::vector<MixedSineEntry> entries;
        for (const auto& e : meta.at("entries"))
            entries.push_back({e.at("channel").get<int>() - 1, e.at("form").get<int>(),
                               e.at("u1").get<double>(), e.at("u2").get<double>(),
                               e.at("u3").get<double>(), e.at("u4").get<double>()});
        return mixed_sine_ensemble_explicit(meta.at("channels").get<int>(), entries);
    }
    if (type == "mapped")
        return expand(Signal::from_metadata(meta.at("inner")), ChannelMap::from_json(meta.at("map")));
    throw ConfigError("Signal::from_metadata: unknown signal type '" + type + "'");
}

}  // namespace rcdetect
