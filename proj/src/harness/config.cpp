#include "hev/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "hev/errors.hpp"

namespace hev::harness {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
}

long parse_long(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    }
}

std::size_t non_negative(const std::string& key, long v) {
    if (v < 0) throw ConfigError(key, "must be >= 0");
    return static_cast<std::size_t>(v);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
        if (cfg.values_.count(key)) throw ConfigError(key, "duplicate key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(key, it->second);
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_long(key, it->second);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key, "expected a boolean, got '" + it->second + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(it->second)) out.push_back(parse_double(key, item));
    return out;
}

std::vector<long> KeyValueConfig::get_ints(const std::string& key, const std::vector<long>& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<long> out;
    for (const auto& item : split_list(it->second)) out.push_back(parse_long(key, item));
    return out;
}

void KeyValueConfig::reject_unknown() const {
    for (const auto& [key, value] : values_) {
        if (!used_.count(key)) throw ConfigError(key, "unknown configuration key");
    }
}

ExperimentConfig experiment_from(const KeyValueConfig& kv) {
    ExperimentConfig cfg;
    cfg.name = kv.get_string("experiment.name", cfg.name);

    auto& d = cfg.data;
    d.classes = non_negative("data.classes", kv.get_int("data.classes", static_cast<long>(d.classes)));
    {
        std::vector<long> dims;
        for (auto v : d.dims) dims.push_back(static_cast<long>(v));
        dims = kv.get_ints("data.dims", dims);
        d.dims.clear();
        for (long v : dims) d.dims.push_back(non_negative("data.dims", v));
    }
    d.separation = kv.get_double("data.separation", d.separation);
    d.informativeness = kv.get_doubles("data.informativeness", std::vector<double>(d.dims.size(), 1.0));
    d.noise_std = kv.get_double("data.noise_std", d.noise_std);
    d.n_train = non_negative("data.n_train", kv.get_int("data.n_train", static_cast<long>(d.n_train)));
    d.n_test = non_negative("data.n_test", kv.get_int("data.n_test", static_cast<long>(d.n_test)));
    d.validate();
    if (d.classes < 2) throw ConfigError("data.classes", "classification needs at least 2 classes");

    cfg.hidden = non_negative("model.hidden", kv.get_int("model.hidden", static_cast<long>(cfg.hidden)));
    cfg.pseudo_view = kv.get_bool("model.pseudo", cfg.pseudo_view);

    auto& t = cfg.train;
    try {
        t.holder = HolderConfig(kv.get_double("train.alpha_h", t.holder.alpha_h()),
                                kv.get_double("train.gamma", t.holder.gamma()));
    } catch (const DomainError& e) {
        throw ConfigError("train.alpha_h/train.gamma", e.what());
    }
    t.lambda_max = kv.get_double("train.lambda_max", t.lambda_max);
    t.anneal_epochs = static_cast<int>(kv.get_int("train.anneal_epochs", t.anneal_epochs));
    t.learning_rate = kv.get_double("train.learning_rate", t.learning_rate);
    t.epochs = static_cast<int>(kv.get_int("train.epochs", t.epochs));
    t.batch_size = non_negative("train.batch_size", kv.get_int("train.batch_size", static_cast<long>(t.batch_size)));
    const auto reg = kv.get_string("train.regularizer", to_string(t.regularizer));
    if (reg == "phd") {
        t.regularizer = RegularizerKind::PHD;
    } else if (reg == "kl") {
        t.regularizer = RegularizerKind::KL;
    } else {
        throw ConfigError("train.regularizer", "expected 'phd' or 'kl', got '" + reg + "'");
    }
    const auto target = kv.get_string("train.target", to_string(t.target));
    if (target == "masked") {
        t.target = RegularizerTarget::LabelMasked;
    } else if (target == "raw") {
        t.target = RegularizerTarget::Raw;
    } else {
        throw ConfigError("train.target", "expected 'masked' or 'raw', got '" + target + "'");
    }
    t.validate();

    cfg.use_kalman = kv.get_bool("kalman.enabled", cfg.use_kalman);
    cfg.kalman.q = kv.get_double("kalman.q", cfg.kalman.q);
    cfg.kalman.r = kv.get_double("kalman.r", cfg.kalman.r);
    cfg.kalman.p0 = kv.get_double("kalman.p0", cfg.kalman.p0);
    if (!(cfg.kalman.q >= 0.0)) throw ConfigError("kalman.q", "must be >= 0");
    if (!(cfg.kalman.r > 0.0)) throw ConfigError("kalman.r", "must be > 0");
    if (!(cfg.kalman.p0 >= 0.0)) throw ConfigError("kalman.p0", "must be >= 0");

    cfg.sigma2_levels = kv.get_doubles("corrupt.sigma2", cfg.sigma2_levels);
    cfg.eta_levels = kv.get_doubles("corrupt.eta", cfg.eta_levels);
    for (double s : cfg.sigma2_levels) {
        if (!(s >= 0.0)) throw ConfigError("corrupt.sigma2", "variances must be >= 0");
    }
    for (double e : cfg.eta_levels) {
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("corrupt.eta", "missing rates must lie in [0, 1]");
    }
    for (long v : kv.get_ints("corrupt.views", {})) {
        if (v < 0 || static_cast<std::size_t>(v) >= d.dims.size()) throw ConfigError("corrupt.views", "view index out of range");
        cfg.corrupt_views.push_back(static_cast<std::size_t>(v));
    }

    cfg.seeds.clear();
    for (long s : kv.get_ints("experiment.seeds", {0})) cfg.seeds.push_back(static_cast<std::uint64_t>(non_negative("experiment.seeds", s)));
    if (cfg.seeds.empty()) throw ConfigError("experiment.seeds", "need at least one seed");
    cfg.jobs = std::max<std::size_t>(1, non_negative("experiment.jobs", kv.get_int("experiment.jobs", 1)));

    cfg.grid_alpha_h = kv.get_doubles("grid.alpha_h", cfg.grid_alpha_h);
    cfg.grid_gamma = kv.get_doubles("grid.gamma", cfg.grid_gamma);
    for (double a : cfg.grid_alpha_h) {
        if (!(a > 1.0)) throw ConfigError("grid.alpha_h", "every exponent must be > 1");
    }
    for (double g : cfg.grid_gamma) {
        if (!(g > 0.0)) throw ConfigError("grid.gamma", "every power must be > 0");
    }

    kv.reject_unknown();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) { return experiment_from(KeyValueConfig::load(path)); }

const std::string& quickstart_config_text() {
    static const std::string text = R"(# Small two-view run: trains on clean data, then evaluates clean,
# noisy and partially missing test splits.
experiment.name = quickstart
experiment.seeds = 7

data.classes = 3
data.dims = 8, 8
data.separation = 2.5
data.informativeness = 1.0, 0.8
data.noise_std = 1.0
data.n_train = 600
data.n_test = 200

model.hidden = 16
model.pseudo = true

train.alpha_h = 1.5
train.gamma = 1.0
train.lambda_max = 0.5
train.anneal_epochs = 10
train.learning_rate = 0.01
train.epochs = 20
train.batch_size = 64
train.regularizer = phd
train.target = masked

kalman.enabled = true
kalman.q = 0.0001
kalman.r = 0.01
kalman.p0 = 1.0

corrupt.sigma2 = 0, 0.01, 0.03
corrupt.eta = 0, 0.3
corrupt.views = 0
)";
    return text;
}

}  // namespace hev::harness
