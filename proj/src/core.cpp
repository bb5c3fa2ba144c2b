#include "rssbreath/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rssbreath {

namespace {

std::string at(const std::string& origin, int line) {
    return origin + ":" + std::to_string(line);
}

bool parse_double_strict(const std::string& text, double* out) {
    if (text.empty()) return false;
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(begin, &end);
    if (end != begin + text.size() || errno == ERANGE || !std::isfinite(v)) return false;
    *out = v;
    return true;
}

bool parse_int_strict(const std::string& text, long long* out) {
    if (text.empty()) return false;
    const char* begin = text.c_str();
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(begin, &end, 10);
    if (end != begin + text.size() || errno == ERANGE) return false;
    *out = v;
    return true;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const char* to_string(MotionState state) {
    return state == MotionState::kStill ? "S1" : "S2";
}

std::string format_double(double value) {
    if (!std::isfinite(value)) {
        throw DataError("refusing to serialize non-finite value");
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double round_half_even(double value) {
    double floor_part = std::floor(value);
    double frac = value - floor_part;
    if (frac > 0.5) return floor_part + 1.0;
    if (frac < 0.5) return floor_part;
    // Exact tie: choose the even neighbor.
    return (std::fmod(floor_part, 2.0) == 0.0) ? floor_part : floor_part + 1.0;
}

// ---------------------------------------------------------------------------
// PipelineConfig

int PipelineConfig::resolved_mean_window() const {
    if (mean_window > 0) return mean_window;
    return static_cast<int>(std::lround(fs_hz / f_max_hz));
}

double PipelineConfig::resolved_passband_hz() const {
    return filter_passband_hz > 0.0 ? filter_passband_hz : f_min_hz;
}

double PipelineConfig::resolved_stopband_hz() const {
    return filter_stopband_hz > 0.0 ? filter_stopband_hz : f_max_hz;
}

int PipelineConfig::window_length() const {
    return static_cast<int>(std::lround(est_window_s * fs_hz / decimation));
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };

    if (!(fs_hz > 0.0)) fail("fs_hz must be positive");
    if (num_channels < 1) fail("channels must be at least 1");
    if (!(f_min_hz > 0.0)) fail("f_min_hz must be positive");
    if (!(f_min_hz < f_max_hz)) fail("f_min_hz must be below f_max_hz");
    if (!(f_max_hz < fs_hz / 2.0)) {
        fail("f_max_hz (" + format_double(f_max_hz) + ") must be below half of fs_hz ("
             + format_double(fs_hz / 2.0) + ")");
    }
    if (decimation < 1) fail("decimation must be at least 1");
    if (f_max_hz > fs_hz / (2.0 * decimation) + 1e-12) {
        fail("f_max_hz (" + format_double(f_max_hz)
             + ") exceeds the post-decimation Nyquist rate ("
             + format_double(fs_hz / (2.0 * decimation)) + "); lower decimation or f_max_hz");
    }
    if (mean_window < 0) fail("mean_window must be positive (or 0 for automatic)");
    if (resolved_mean_window() < 1) fail("derived mean window is empty; check fs_hz/f_max_hz");
    if (!(est_window_s > 0.0)) fail("est_window_s must be positive");
    if (window_length() < 8) {
        fail("estimation window of " + std::to_string(window_length())
             + " samples is too short; increase est_window_s or lower decimation");
    }
    if (!(freq_grid_hz > 0.0)) fail("freq_grid_hz must be positive");
    if (freq_grid_hz > f_max_hz - f_min_hz) {
        fail("freq_grid_hz is wider than the search band");
    }
    if (estimate_stride_s < 0.0) fail("estimate_stride_s must be non-negative");

    double pass = resolved_passband_hz();
    double stop = resolved_stopband_hz();
    if (!(pass > 0.0)) fail("filter passband edge must be positive");
    if (!(pass < stop)) fail("filter passband edge must be below the stopband edge");
    if (!(stop < fs_hz / 2.0)) fail("filter stopband edge must be below half of fs_hz");
    if (stop < f_max_hz - 1e-12) {
        fail("filter stopband edge must not cut into the search band");
    }
    if (!(filter_ripple_db > 0.0)) fail("filter_ripple_db must be positive");
    if (!(filter_atten_db > 0.0)) fail("filter_atten_db must be positive");

    if (std::abs(p11 + p12 - 1.0) > 1e-9 || std::abs(p21 + p22 - 1.0) > 1e-9) {
        fail("detector transition rows must each sum to 1");
    }
    if (std::min({p11, p12, p21, p22}) < 0.0) fail("detector transition probabilities must be >= 0");
    if (std::abs(pi1 + pi2 - 1.0) > 1e-9 || pi1 < 0.0 || pi2 < 0.0) {
        fail("detector initial weights must be non-negative and sum to 1");
    }
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) fail("detector sigmas must be positive");
}

// ---------------------------------------------------------------------------
// key=value parsing

namespace kv {

std::vector<Item> parse(std::istream& in, const std::string& origin) {
    std::vector<Item> items;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = line;
        std::size_t hash = body.find('#');
        if (hash != std::string::npos) body.erase(hash);
        body = trim(body);
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) {
                throw ConfigError(at(origin, lineno) + ": malformed section header '" + body + "'");
            }
            section = trim(body.substr(1, body.size() - 2));
            items.push_back({section, "", "", lineno});
            continue;
        }
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(at(origin, lineno) + ": expected key=value, got '" + body + "'");
        }
        Item item;
        item.section = section;
        item.key = trim(body.substr(0, eq));
        item.value = trim(body.substr(eq + 1));
        item.line = lineno;
        if (item.key.empty()) {
            throw ConfigError(at(origin, lineno) + ": empty key");
        }
        items.push_back(std::move(item));
    }
    return items;
}

double to_double(const Item& item, const std::string& origin) {
    double v = 0.0;
    if (!parse_double_strict(item.value, &v)) {
        throw ConfigError(at(origin, item.line) + ": value for '" + item.key
                          + "' is not a number: '" + item.value + "'");
    }
    return v;
}

long long to_int(const Item& item, const std::string& origin) {
    long long v = 0;
    if (!parse_int_strict(item.value, &v)) {
        throw ConfigError(at(origin, item.line) + ": value for '" + item.key
                          + "' is not an integer: '" + item.value + "'");
    }
    return v;
}

}  // namespace kv

bool apply_config_key(PipelineConfig& config, const std::string& key,
                      const std::string& value, const std::string& origin, int line) {
    kv::Item item{"", key, value, line};
    auto num = [&] { return kv::to_double(item, origin); };
    auto integer = [&] { return static_cast<int>(kv::to_int(item, origin)); };

    if (key == "fs_hz") config.fs_hz = num();
    else if (key == "channels") config.num_channels = integer();
    else if (key == "f_min_hz") config.f_min_hz = num();
    else if (key == "f_max_hz") config.f_max_hz = num();
    else if (key == "mean_window") config.mean_window = integer();
    else if (key == "decimation") config.decimation = integer();
    else if (key == "est_window_s") config.est_window_s = num();
    else if (key == "freq_grid_hz") config.freq_grid_hz = num();
    else if (key == "estimate_stride_s") config.estimate_stride_s = num();
    else if (key == "filter_passband_hz") config.filter_passband_hz = num();
    else if (key == "filter_stopband_hz") config.filter_stopband_hz = num();
    else if (key == "filter_ripple_db") config.filter_ripple_db = num();
    else if (key == "filter_atten_db") config.filter_atten_db = num();
    else if (key == "p11") config.p11 = num();
    else if (key == "p12") config.p12 = num();
    else if (key == "p21") config.p21 = num();
    else if (key == "p22") config.p22 = num();
    else if (key == "pi1") config.pi1 = num();
    else if (key == "pi2") config.pi2 = num();
    else if (key == "sigma1") config.sigma1 = num();
    else if (key == "sigma2") config.sigma2 = num();
    else return false;
    return true;
}

PipelineConfig parse_config(std::istream& in, const std::string& origin,
                            std::vector<std::string>* keys_seen) {
    PipelineConfig config;
    for (const kv::Item& item : kv::parse(in, origin)) {
        if (!item.section.empty() || item.key.empty()) {
            throw ConfigError(at(origin, item.line) + ": sections are not allowed in config files");
        }
        if (!apply_config_key(config, item.key, item.value, origin, item.line)) {
            throw ConfigError(at(origin, item.line) + ": unknown config key '" + item.key + "'");
        }
        if (keys_seen != nullptr) keys_seen->push_back(item.key);
    }
    config.validate();
    return config;
}

PipelineConfig load_config(const std::string& path, std::vector<std::string>* keys_seen) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    return parse_config(in, path, keys_seen);
}

void write_config(const PipelineConfig& config, std::ostream& out) {
    out << "# sampling\n";
    out << "fs_hz=" << format_double(config.fs_hz) << "\n";
    out << "channels=" << config.num_channels << "\n";
    out << "# search band / chain\n";
    out << "f_min_hz=" << format_double(config.f_min_hz) << "\n";
    out << "f_max_hz=" << format_double(config.f_max_hz) << "\n";
    out << "mean_window=" << config.mean_window << "\n";
    out << "decimation=" << config.decimation << "\n";
    out << "est_window_s=" << format_double(config.est_window_s) << "\n";
    out << "freq_grid_hz=" << format_double(config.freq_grid_hz) << "\n";
    out << "estimate_stride_s=" << format_double(config.estimate_stride_s) << "\n";
    out << "# anti-alias filter mask\n";
    out << "filter_passband_hz=" << format_double(config.filter_passband_hz) << "\n";
    out << "filter_stopband_hz=" << format_double(config.filter_stopband_hz) << "\n";
    out << "filter_ripple_db=" << format_double(config.filter_ripple_db) << "\n";
    out << "filter_atten_db=" << format_double(config.filter_atten_db) << "\n";
    out << "# motion detector\n";
    out << "p11=" << format_double(config.p11) << "\n";
    out << "p12=" << format_double(config.p12) << "\n";
    out << "p21=" << format_double(config.p21) << "\n";
    out << "p22=" << format_double(config.p22) << "\n";
    out << "pi1=" << format_double(config.pi1) << "\n";
    out << "pi2=" << format_double(config.pi2) << "\n";
    out << "sigma1=" << format_double(config.sigma1) << "\n";
    out << "sigma2=" << format_double(config.sigma2) << "\n";
}

void save_config(const PipelineConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write config file: " + path);
    write_config(config, out);
    if (!out.good()) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Trace CSV

RssTrace read_trace(std::istream& in, const std::string& origin) {
    RssTrace trace;
    bool have_fs = false, have_channels = false, have_quant = false;

    std::string line;
    int lineno = 0;
    std::size_t row_index = 0;

    auto parse_header = [&](const std::string& body) {
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) return;  // plain comment, ignore
        std::string key = body.substr(1, eq - 1);
        std::string value = trim(body.substr(eq + 1));
        if (key == "fs_hz") {
            if (!parse_double_strict(value, &trace.fs_hz) || trace.fs_hz <= 0.0) {
                throw DataError(at(origin, lineno) + ": bad fs_hz header value '" + value + "'");
            }
            have_fs = true;
        } else if (key == "channels") {
            long long c = 0;
            if (!parse_int_strict(value, &c) || c < 1) {
                throw DataError(at(origin, lineno) + ": bad channels header value '" + value + "'");
            }
            trace.num_channels = static_cast<int>(c);
            have_channels = true;
        } else if (key == "quant_step_db") {
            if (!parse_double_strict(value, &trace.quant_step_db) || trace.quant_step_db < 0.0) {
                throw DataError(at(origin, lineno) + ": bad quant_step_db header value '" + value + "'");
            }
            have_quant = true;
        }
        // Unrecognized #key= lines are treated as comments.
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            parse_header(line);
            continue;
        }
        if (!(have_fs && have_channels && have_quant)) {
            throw DataError(at(origin, lineno)
                            + ": data row before complete header (#fs_hz=, #channels=, #quant_step_db=)");
        }
        // Row: cycle,v_1,...,v_C
        std::size_t pos = 0;
        int field = -1;  // -1 while reading the cycle column
        std::size_t base = trace.samples.size();
        trace.samples.resize(base + static_cast<std::size_t>(trace.num_channels));
        while (true) {
            std::size_t comma = line.find(',', pos);
            std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                           : comma - pos);
            if (field == -1) {
                long long cycle = 0;
                if (!parse_int_strict(trim(cell), &cycle)) {
                    throw DataError(at(origin, lineno) + ": bad cycle index '" + cell + "'");
                }
                if (cycle != static_cast<long long>(row_index)) {
                    throw DataError(at(origin, lineno) + ": cycle index " + std::to_string(cycle)
                                    + " out of order (expected " + std::to_string(row_index) + ")");
                }
            } else {
                if (field >= trace.num_channels) {
                    throw DataError(at(origin, lineno) + ": row has more than "
                                    + std::to_string(trace.num_channels) + " channel values");
                }
                double v = 0.0;
                if (!parse_double_strict(trim(cell), &v)) {
                    throw DataError(at(origin, lineno) + ": bad rss value '" + cell + "'");
                }
                trace.samples[base + static_cast<std::size_t>(field)] = v;
            }
            ++field;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (field != trace.num_channels) {
            throw DataError(at(origin, lineno) + ": row has " + std::to_string(field)
                            + " channel values, header declares "
                            + std::to_string(trace.num_channels));
        }
        ++row_index;
    }
    if (!(have_fs && have_channels && have_quant)) {
        throw DataError(origin + ": missing trace header lines (#fs_hz=, #channels=, #quant_step_db=)");
    }
    return trace;
}

RssTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file: " + path);
    return read_trace(in, path);
}

void write_trace(const RssTrace& trace, std::ostream& out) {
    out << "#fs_hz=" << format_double(trace.fs_hz) << "\n";
    out << "#channels=" << trace.num_channels << "\n";
    out << "#quant_step_db=" << format_double(trace.quant_step_db) << "\n";
    const std::size_t rows = trace.rows();
    for (std::size_t k = 0; k < rows; ++k) {
        out << k;
        const double* row = trace.row(k);
        for (int c = 0; c < trace.num_channels; ++c) {
            out << ',' << format_double(row[c]);
        }
        out << '\n';
    }
}

void write_trace(const RssTrace& trace, const std::string& path) {
    if (trace.num_channels < 1) throw DataError("trace has no channels; refusing to write " + path);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace file: " + path);
    write_trace(trace, out);
    if (!out.good()) throw DataError("write failed: " + path);
}

}  // namespace rssbreath
