#include "rssbreath/synth.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rssbreath/log.hpp"

namespace rssbreath::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Baseline RSS range the per-channel means are drawn from.
constexpr double kMeanLoDbm = -80.0;
constexpr double kMeanHiDbm = -40.0;

// Scenario-file randomness (amplitude/phase draws) comes from a stream
// decoupled from the generator's noise stream.
constexpr std::uint64_t kResolveSeedSalt = 0xA5A5A5A55A5A5A5AULL;

std::size_t segment_rows(const Segment& seg, double fs_hz) {
    return static_cast<std::size_t>(std::lround(seg.duration_s * fs_hz));
}

}  // namespace

double Rng::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

double quantize(double value_db, double step_db) {
    if (step_db <= 0.0) return value_db;
    return step_db * round_half_even(value_db / step_db);
}

double SynthScenario::duration_s() const {
    double total = 0.0;
    for (const Segment& seg : segments) total += seg.duration_s;
    return total;
}

void SynthScenario::validate() const {
    config.validate();
    if (quant_step_db < 0.0) throw ConfigError("scenario: quant_step_db must be >= 0");
    if (segments.empty()) throw ConfigError("scenario: needs at least one [segment]");
    const std::size_t channels = static_cast<std::size_t>(config.num_channels);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& seg = segments[i];
        std::string where = "scenario segment " + std::to_string(i + 1);
        if (!(seg.duration_s > 0.0)) throw ConfigError(where + ": duration_s must be positive");
        if (seg.noise_sigma_db < 0.0) throw ConfigError(where + ": noise_sigma_db must be >= 0");
        for (std::size_t p = 0; p < seg.persons.size(); ++p) {
            const PersonSignal& person = seg.persons[p];
            std::string who = where + " person " + std::to_string(p + 1);
            if (!(person.freq_hz > 0.0) || person.freq_hz >= config.fs_hz / 2.0) {
                throw ConfigError(who + ": freq_hz must lie in (0, fs/2)");
            }
            if (person.amplitudes_db.size() != channels) {
                throw ConfigError(who + ": needs one amplitude per channel");
            }
            if (person.phases_rad.size() != channels) {
                throw ConfigError(who + ": needs one phase per channel");
            }
            for (double a : person.amplitudes_db) {
                if (a < 0.0) throw ConfigError(who + ": amplitudes must be >= 0");
            }
            if (person.phase_jitter_rad < 0.0) {
                throw ConfigError(who + ": phase_jitter_rad must be >= 0");
            }
        }
    }
}

SynthResult generate(const SynthScenario& scenario) {
    scenario.validate();
    const PipelineConfig& cfg = scenario.config;
    const int C = cfg.num_channels;
    const double ts = 1.0 / cfg.fs_hz;

    std::size_t total_rows = 0;
    for (const Segment& seg : scenario.segments) total_rows += segment_rows(seg, cfg.fs_hz);

    SynthResult out;
    out.trace.fs_hz = cfg.fs_hz;
    out.trace.quant_step_db = scenario.quant_step_db;
    out.trace.num_channels = C;
    out.trace.samples.resize(total_rows * static_cast<std::size_t>(C));
    out.truth.state.reserve(total_rows);
    out.truth.breath_hz.reserve(total_rows);

    Rng rng(scenario.seed);
    out.truth.channel_mean_dbm.resize(C);
    for (int c = 0; c < C; ++c) {
        out.truth.channel_mean_dbm[c] = rng.uniform(kMeanLoDbm, kMeanHiDbm);
    }

    std::size_t k = 0;  // global cycle index; keeps person phase continuous
    for (const Segment& seg : scenario.segments) {
        const std::size_t rows = segment_rows(seg, cfg.fs_hz);
        // Phase-walk state restarts per segment (persons are per-segment).
        std::vector<double> drift(seg.persons.size(), 0.0);
        std::vector<double> freqs;
        freqs.reserve(seg.persons.size());
        for (const PersonSignal& p : seg.persons) freqs.push_back(p.freq_hz);

        for (std::size_t r = 0; r < rows; ++r, ++k) {
            double* row = out.trace.row(k);
            for (std::size_t p = 0; p < seg.persons.size(); ++p) {
                const PersonSignal& person = seg.persons[p];
                if (person.phase_jitter_rad > 0.0) {
                    // Increment variance integrates to jitter^2 per breath period.
                    drift[p] += rng.gaussian() * person.phase_jitter_rad
                                * std::sqrt(person.freq_hz * ts);
                }
            }
            double common_noise = 0.0;
            if (seg.state == MotionState::kMotion && seg.noise_sigma_db > 0.0) {
                common_noise = rng.gaussian() * seg.noise_sigma_db;
            }
            for (int c = 0; c < C; ++c) {
                double v = out.truth.channel_mean_dbm[c];
                for (std::size_t p = 0; p < seg.persons.size(); ++p) {
                    const PersonSignal& person = seg.persons[p];
                    v += person.amplitudes_db[c]
                         * std::cos(kTwoPi * person.freq_hz * ts * static_cast<double>(k)
                                    + person.phases_rad[c] + drift[p]);
                }
                if (seg.state == MotionState::kStill) {
                    if (seg.noise_sigma_db > 0.0) v += rng.gaussian() * seg.noise_sigma_db;
                } else {
                    v += common_noise;
                }
                row[c] = quantize(v, scenario.quant_step_db);
            }
            out.truth.state.push_back(seg.state);
            out.truth.breath_hz.push_back(freqs);
        }
    }
    return out;
}

RssTrace downsample_trace(const RssTrace& trace, int delta) {
    if (delta < 1) throw ConfigError("downsample: delta must be >= 1");
    RssTrace out;
    out.fs_hz = trace.fs_hz / delta;
    out.quant_step_db = trace.quant_step_db;
    out.num_channels = trace.num_channels;
    const std::size_t rows = trace.rows();
    for (std::size_t k = 0; k < rows; k += static_cast<std::size_t>(delta)) {
        const double* row = trace.row(k);
        out.samples.insert(out.samples.end(), row, row + trace.num_channels);
    }
    return out;
}

GroundTruth downsample_truth(const GroundTruth& truth, int delta) {
    if (delta < 1) throw ConfigError("downsample: delta must be >= 1");
    GroundTruth out;
    out.channel_mean_dbm = truth.channel_mean_dbm;
    for (std::size_t k = 0; k < truth.state.size(); k += static_cast<std::size_t>(delta)) {
        out.state.push_back(truth.state[k]);
        out.breath_hz.push_back(truth.breath_hz[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = text.find(sep, pos);
        parts.push_back(text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return parts;
}

double parse_num(const std::string& text, const std::string& origin, int line,
                 const std::string& what) {
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
        throw ConfigError(origin + ":" + std::to_string(line) + ": bad " + what + " '" + text + "'");
    }
    return v;
}

// amp_db spec -> per-channel amplitudes.
std::vector<double> resolve_amplitudes(const std::string& spec, int channels, Rng& rng,
                                       const std::string& origin, int line) {
    std::vector<std::string> parts = split(spec, ':');
    const std::string& mode = parts[0];
    std::vector<double> amps(channels, 0.0);
    if (mode == "value" && parts.size() == 2) {
        double a = parse_num(parts[1], origin, line, "amplitude");
        std::fill(amps.begin(), amps.end(), a);
    } else if (mode == "uniform" && parts.size() == 3) {
        double lo = parse_num(parts[1], origin, line, "amplitude bound");
        double hi = parse_num(parts[2], origin, line, "amplitude bound");
        for (double& a : amps) a = rng.uniform(lo, hi);
    } else if (mode == "list" && parts.size() == 2) {
        std::vector<std::string> cells = split(parts[1], ',');
        if (static_cast<int>(cells.size()) != channels) {
            throw ConfigError(origin + ":" + std::to_string(line) + ": amp_db list needs "
                              + std::to_string(channels) + " entries, got "
                              + std::to_string(cells.size()));
        }
        for (int c = 0; c < channels; ++c) amps[c] = parse_num(cells[c], origin, line, "amplitude");
    } else if (mode == "channels" && parts.size() == 3) {
        double a = parse_num(parts[2], origin, line, "amplitude");
        for (const std::string& cell : split(parts[1], ',')) {
            double idx = parse_num(cell, origin, line, "channel index");
            int c = static_cast<int>(idx);
            if (c < 0 || c >= channels || idx != c) {
                throw ConfigError(origin + ":" + std::to_string(line)
                                  + ": channel index out of range: " + cell);
            }
            amps[c] = a;
        }
    } else {
        throw ConfigError(origin + ":" + std::to_string(line) + ": bad amp_db spec '" + spec + "'");
    }
    return amps;
}

// phase spec -> per-channel phases.
std::vector<double> resolve_phases(const std::string& spec, int channels, Rng& rng,
                                   const std::string& origin, int line) {
    std::vector<std::string> parts = split(spec, ':');
    const std::string& mode = parts[0];
    std::vector<double> phases(channels, 0.0);
    if (mode == "value" && parts.size() == 2) {
        double p = parse_num(parts[1], origin, line, "phase");
        std::fill(phases.begin(), phases.end(), p);
    } else if (mode == "random" && parts.size() == 1) {
        for (double& p : phases) p = rng.uniform(-std::numbers::pi, std::numbers::pi);
    } else if (mode == "bimodal" && parts.size() == 2) {
        // Alternate channels sit half a cycle apart: the pattern seen when a
        // subject's motion raises RSS on some channels and lowers it on others.
        double base = parse_num(parts[1], origin, line, "phase");
        for (int c = 0; c < channels; ++c) {
            phases[c] = (c % 2 == 0) ? base : base + std::numbers::pi;
        }
    } else if (mode == "list" && parts.size() == 2) {
        std::vector<std::string> cells = split(parts[1], ',');
        if (static_cast<int>(cells.size()) != channels) {
            throw ConfigError(origin + ":" + std::to_string(line) + ": phase list needs "
                              + std::to_string(channels) + " entries, got "
                              + std::to_string(cells.size()));
        }
        for (int c = 0; c < channels; ++c) phases[c] = parse_num(cells[c], origin, line, "phase");
    } else {
        throw ConfigError(origin + ":" + std::to_string(line) + ": bad phase spec '" + spec + "'");
    }
    return phases;
}

}  // namespace

SynthScenario parse_scenario(std::istream& in, const std::string& origin) {
    std::vector<kv::Item> items = kv::parse(in, origin);

    SynthScenario scenario;
    // First pass: top-level keys (needed before person draws so the resolve
    // stream is seeded consistently).
    for (const kv::Item& item : items) {
        if (!item.section.empty() || item.key.empty()) continue;
        if (item.key == "seed") {
            scenario.seed = static_cast<std::uint64_t>(kv::to_int(item, origin));
        } else if (item.key == "quant_step_db") {
            scenario.quant_step_db = kv::to_double(item, origin);
        } else if (!apply_config_key(scenario.config, item.key, item.value, origin, item.line)) {
            throw ConfigError(origin + ":" + std::to_string(item.line)
                              + ": unknown scenario key '" + item.key + "'");
        }
    }

    Rng resolve_rng(scenario.seed ^ kResolveSeedSalt);
    const int channels = scenario.config.num_channels;

    Segment* segment = nullptr;
    PersonSignal* person = nullptr;
    for (const kv::Item& item : items) {
        if (item.key.empty()) {  // section marker
            if (item.section == "segment") {
                scenario.segments.emplace_back();
                segment = &scenario.segments.back();
                person = nullptr;
            } else if (item.section == "person") {
                if (segment == nullptr) {
                    throw ConfigError(origin + ":" + std::to_string(item.line)
                                      + ": [person] outside any [segment]");
                }
                segment->persons.emplace_back();
                person = &segment->persons.back();
                person->amplitudes_db.assign(channels, 0.0);
                person->phases_rad.assign(channels, 0.0);
            } else {
                throw ConfigError(origin + ":" + std::to_string(item.line)
                                  + ": unknown section [" + item.section + "]");
            }
            continue;
        }
        if (item.section.empty()) continue;  // handled in the first pass
        if (item.section == "segment" && person == nullptr) {
            if (segment == nullptr) continue;
            if (item.key == "state") {
                if (item.value == "S1") segment->state = MotionState::kStill;
                else if (item.value == "S2") segment->state = MotionState::kMotion;
                else {
                    throw ConfigError(origin + ":" + std::to_string(item.line)
                                      + ": state must be S1 or S2, got '" + item.value + "'");
                }
            } else if (item.key == "duration_s") {
                segment->duration_s = kv::to_double(item, origin);
            } else if (item.key == "sigma_db") {
                segment->noise_sigma_db = kv::to_double(item, origin);
            } else {
                throw ConfigError(origin + ":" + std::to_string(item.line)
                                  + ": unknown segment key '" + item.key + "'");
            }
        } else if (item.section == "person" && person != nullptr) {
            if (item.key == "freq_hz") {
                person->freq_hz = kv::to_double(item, origin);
            } else if (item.key == "amp_db") {
                person->amplitudes_db =
                    resolve_amplitudes(item.value, channels, resolve_rng, origin, item.line);
            } else if (item.key == "phase") {
                person->phases_rad =
                    resolve_phases(item.value, channels, resolve_rng, origin, item.line);
            } else if (item.key == "phase_jitter_rad") {
                person->phase_jitter_rad = kv::to_double(item, origin);
            } else {
                throw ConfigError(origin + ":" + std::to_string(item.line)
                                  + ": unknown person key '" + item.key + "'");
            }
        } else {
            throw ConfigError(origin + ":" + std::to_string(item.line) + ": key '" + item.key
                              + "' in unexpected section [" + item.section + "]");
        }
    }

    scenario.validate();
    return scenario;
}

SynthScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scenario file: " + path);
    return parse_scenario(in, path);
}

// ---------------------------------------------------------------------------
// Ground-truth sidecar

void write_truth(const GroundTruth& truth, std::ostream& out) {
    std::size_t max_persons = 0;
    for (const auto& freqs : truth.breath_hz) max_persons = std::max(max_persons, freqs.size());
    out << "cycle,state";
    for (std::size_t p = 0; p < max_persons; ++p) out << ",f_person" << (p + 1);
    out << '\n';
    for (std::size_t k = 0; k < truth.state.size(); ++k) {
        out << k << ',' << to_string(truth.state[k]);
        for (double f : truth.breath_hz[k]) out << ',' << format_double(f);
        out << '\n';
    }
}

void write_truth(const GroundTruth& truth, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ground-truth file: " + path);
    write_truth(truth, out);
    if (!out.good()) throw DataError("write failed: " + path);
}

GroundTruth read_truth(std::istream& in, const std::string& origin) {
    GroundTruth truth;
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line.rfind("cycle,state", 0) != 0) {
                throw DataError(origin + ":" + std::to_string(lineno)
                                + ": expected ground-truth header 'cycle,state,...'");
            }
            saw_header = true;
            continue;
        }
        std::vector<std::string> cells = split(line, ',');
        if (cells.size() < 2) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": truncated row");
        }
        long long cycle = 0;
        {
            char* end = nullptr;
            cycle = std::strtoll(cells[0].c_str(), &end, 10);
            if (end != cells[0].c_str() + cells[0].size()) {
                throw DataError(origin + ":" + std::to_string(lineno) + ": bad cycle index");
            }
        }
        if (cycle != static_cast<long long>(truth.state.size())) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": cycle index out of order");
        }
        if (cells[1] == "S1") truth.state.push_back(MotionState::kStill);
        else if (cells[1] == "S2") truth.state.push_back(MotionState::kMotion);
        else throw DataError(origin + ":" + std::to_string(lineno) + ": bad state '" + cells[1] + "'");
        std::vector<double> freqs;
        for (std::size_t i = 2; i < cells.size(); ++i) {
            if (cells[i].empty()) continue;
            char* end = nullptr;
            double f = std::strtod(cells[i].c_str(), &end);
            if (end != cells[i].c_str() + cells[i].size() || !std::isfinite(f)) {
                throw DataError(origin + ":" + std::to_string(lineno) + ": bad frequency '"
                                + cells[i] + "'");
            }
            freqs.push_back(f);
        }
        truth.breath_hz.push_back(std::move(freqs));
    }
    if (!saw_header) throw DataError(origin + ": empty ground-truth file");
    return truth;
}

GroundTruth read_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ground-truth file: " + path);
    return read_truth(in, path);
}

}  // namespace rssbreath::synth
