#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>

#include "mimo/baselines.hpp"
#include "mimo/errors.hpp"
#include "mimo/harness.hpp"

namespace mimo {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

std::string strip_comment(const std::string& line) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::vector<std::string> split_list(const std::string& field, const std::string& raw) {
    std::string v = trim(raw);
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw ConfigError(field, "unterminated list");
        v = v.substr(1, v.size() - 2);
    }
    std::vector<std::string> items;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const std::string item = unquote(trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (!item.empty()) items.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return items;
}

double parse_double(const std::string& field, const std::string& text) {
    const std::string t = lower(unquote(trim(text)));
    if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto* first = t.data();
    const auto* last = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || t.empty()) throw ConfigError(field, "expected a number, got '" + text + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& field, const std::string& text) {
    const std::string t = unquote(trim(text));
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw ConfigError(field, "expected a nonnegative integer, got '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& field, const std::string& text) {
    const std::string t = lower(unquote(trim(text)));
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(field, "expected true or false, got '" + text + "'");
}

std::vector<int> parse_modulation(const std::string& field, const std::string& text) {
    std::vector<int> orders;
    for (const auto& item : split_list(field, text)) {
        std::string order_text = lower(item);
        std::size_t count = 1;
        if (const auto star = order_text.find('*'); star != std::string::npos) {
            count = static_cast<std::size_t>(parse_uint(field, order_text.substr(star + 1)));
            order_text = order_text.substr(0, star);
        }
        order_text = trim(order_text);
        if (order_text.rfind("qam", 0) == 0) order_text = order_text.substr(3);
        const auto order = static_cast<int>(parse_uint(field, order_text));
        orders.insert(orders.end(), count, order);
    }
    if (orders.empty()) throw ConfigError(field, "empty modulation list");
    return orders;
}

ScheduleSpacing parse_spacing(const std::string& field, const std::string& text) {
    const std::string t = lower(unquote(trim(text)));
    if (t == "geometric") return ScheduleSpacing::Geometric;
    if (t == "linear") return ScheduleSpacing::Linear;
    throw ConfigError(field, "expected geometric or linear, got '" + text + "'");
}

} // namespace

std::string_view detector_name(DetectorKind kind) noexcept {
    switch (kind) {
    case DetectorKind::ZF: return "zf";
    case DetectorKind::MMSE: return "mmse";
    case DetectorKind::ML: return "ml";
    case DetectorKind::Langevin: return "langevin";
    }
    return "?";
}

DetectorKind parse_detector_kind(std::string_view name) {
    const std::string n = lower(trim(name));
    if (n == "zf") return DetectorKind::ZF;
    if (n == "mmse") return DetectorKind::MMSE;
    if (n == "ml") return DetectorKind::ML;
    if (n == "langevin") return DetectorKind::Langevin;
    throw ConfigError("detectors", "unknown detector '" + std::string(name) + "' (expected zf, mmse, ml or langevin)");
}

AblationAxis parse_ablation_axis(std::string_view name) {
    const std::string n = lower(trim(name));
    if (n == "levels" || n == "l") return AblationAxis::Levels;
    if (n == "trajectories" || n == "m") return AblationAxis::Trajectories;
    if (n == "temperature" || n == "tau") return AblationAxis::Temperature;
    throw ConfigError("axis", "unknown ablation axis '" + std::string(name) + "' (expected levels, trajectories or tau)");
}

void ExperimentConfig::validate() const {
    if (n_users < 1) throw ConfigError("n_users", "must be >= 1");
    if (n_rx < n_users) throw ConfigError("n_rx", "must be >= n_users");
    if (channel == ChannelModel::Kronecker && !(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho", "must lie in [0, 1)");
    if (modulation.size() != 1 && modulation.size() != n_users) {
        throw ConfigError("modulation", "per-user list has " + std::to_string(modulation.size()) +
                                            " entries but n_users is " + std::to_string(n_users));
    }
    for (int order : modulation) {
        if (order != 4 && order != 16 && order != 64) {
            throw ConfigError("modulation", "unsupported QAM order " + std::to_string(order));
        }
    }
    if (snr_db.empty()) throw ConfigError("snr_db", "needs at least one SNR point");
    for (double s : snr_db) {
        if (std::isnan(s) || (std::isinf(s) && s < 0)) throw ConfigError("snr_db", "SNR points must be finite or +inf");
    }
    if (trials < 1) throw ConfigError("trials", "must be >= 1");
    if (vectors_per_channel < 1) throw ConfigError("vectors_per_channel", "must be >= 1");
    if (detectors.empty()) throw ConfigError("detectors", "needs at least one detector");
    langevin.validate();
    if (std::find(detectors.begin(), detectors.end(), DetectorKind::ML) != detectors.end() &&
        plan().product_size() > kMaxExhaustiveCandidates) {
        throw ConfigError("detectors", "ml needs a product alphabet of at most 2^20 candidates");
    }
}

ModulationPlan ExperimentConfig::plan() const {
    if (modulation.size() == 1) {
        const std::vector<int> orders(n_users, modulation.front());
        return ModulationPlan::from_orders(orders);
    }
    return ModulationPlan::from_orders(modulation);
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ExperimentConfig cfg;
    std::map<std::string, bool> seen;
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no);
        if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string::npos) {
            section = trim(body.substr(1, body.size() - 2));
            if (section != "langevin") throw ConfigError(section, where + ": unknown section");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("config", where + ": expected key = value");
        std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (!section.empty()) key = section + "." + key;
        if (seen[key]) throw ConfigError(key, where + ": duplicate key");
        seen[key] = true;

        auto& lc = cfg.langevin;
        if (key == "n_rx") cfg.n_rx = parse_uint(key, value);
        else if (key == "n_users") cfg.n_users = parse_uint(key, value);
        else if (key == "channel") {
            const std::string c = lower(unquote(value));
            if (c == "rayleigh") cfg.channel = ChannelModel::Rayleigh;
            else if (c == "kronecker") cfg.channel = ChannelModel::Kronecker;
            else throw ConfigError(key, "expected rayleigh or kronecker, got '" + value + "'");
        } else if (key == "rho") cfg.rho = parse_double(key, value);
        else if (key == "modulation") cfg.modulation = parse_modulation(key, value);
        else if (key == "snr_db") {
            cfg.snr_db.clear();
            for (const auto& item : split_list(key, value)) cfg.snr_db.push_back(parse_double(key, item));
        } else if (key == "trials") cfg.trials = parse_uint(key, value);
        else if (key == "vectors_per_channel") cfg.vectors_per_channel = parse_uint(key, value);
        else if (key == "detectors") {
            cfg.detectors.clear();
            for (const auto& item : split_list(key, value)) cfg.detectors.push_back(parse_detector_kind(item));
        } else if (key == "seed") cfg.seed = parse_uint(key, value);
        else if (key == "output") cfg.output_path = unquote(value);
        else if (key == "record_wall_time") cfg.record_wall_time = parse_bool(key, value);
        else if (key == "langevin.levels") lc.levels = parse_uint(key, value);
        else if (key == "langevin.iterations") lc.iterations = parse_uint(key, value);
        else if (key == "langevin.epsilon") lc.epsilon = parse_double(key, value);
        else if (key == "langevin.tau") lc.tau = parse_double(key, value);
        else if (key == "langevin.trajectories") lc.trajectories = parse_uint(key, value);
        else if (key == "langevin.sigma_first") lc.sigma_first = parse_double(key, value);
        else if (key == "langevin.sigma_last") lc.sigma_last = parse_double(key, value);
        else if (key == "langevin.schedule") lc.spacing = parse_spacing(key, value);
        else throw ConfigError(key, where + ": unknown key");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open config file " + path.string());
    return parse_config(in, path.string());
}

} // namespace mimo
