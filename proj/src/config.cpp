#include "l2cl/config.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace l2cl {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "scheme",      "layers",     "embedding_dim", "learning_rate", "batch_size",
        "tau",         "alpha",      "lambda1",       "lambda2",       "patience",
        "eval_every",  "max_epochs", "seed_init",     "seed_sample",   "early_stopping",
        "readout_mode", "precision", "workers",       "debug_checks"};
    return keys;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap m;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        m.kv[key] = val;
    }
    return m;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

ConfigResult make_train_config(const ConfigMap& map) {
    ConfigResult out;
    TrainConfig& c = out.config;
    auto& errors = out.errors;

    for (const auto& [k, v] : map.kv) {
        bool known = false;
        for (const auto& key : known_keys())
            if (key == k) known = true;
        if (!known) errors.push_back("unknown key: " + k);
    }

    auto get = [&](const char* key) -> const std::string* {
        auto it = map.kv.find(key);
        return it == map.kv.end() ? nullptr : &it->second;
    };
    auto parse_f = [&](const char* key, double& dst, auto&& check, const char* what) {
        if (const std::string* v = get(key)) {
            double x;
            auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
            if (ec != std::errc() || p != v->data() + v->size() || !check(x)) {
                errors.push_back(std::string(key) + ": " + what + " (got '" + *v + "')");
            } else {
                dst = x;
            }
        }
    };
    auto parse_i = [&](const char* key, auto& dst, int64_t lo, int64_t hi) {
        if (const std::string* v = get(key)) {
            int64_t x;
            auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
            if (ec != std::errc() || p != v->data() + v->size() || x < lo || x > hi) {
                errors.push_back(std::string(key) + ": expected integer in [" +
                                 std::to_string(lo) + ", " + std::to_string(hi) + "] (got '" + *v +
                                 "')");
            } else {
                dst = static_cast<std::remove_reference_t<decltype(dst)>>(x);
            }
        }
    };
    auto parse_u64 = [&](const char* key, uint64_t& dst) {
        if (const std::string* v = get(key)) {
            uint64_t x;
            auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
            if (ec != std::errc() || p != v->data() + v->size()) {
                errors.push_back(std::string(key) + ": expected unsigned integer (got '" + *v +
                                 "')");
            } else {
                dst = x;
            }
        }
    };
    auto parse_b = [&](const char* key, bool& dst) {
        if (const std::string* v = get(key)) {
            if (*v == "true" || *v == "1") {
                dst = true;
            } else if (*v == "false" || *v == "0") {
                dst = false;
            } else {
                errors.push_back(std::string(key) + ": expected true/false (got '" + *v + "')");
            }
        }
    };

    if (const std::string* v = get("scheme")) {
        if (auto s = parse_scheme(*v)) {
            c.scheme = *s;
        } else {
            errors.push_back(
                "scheme: expected one of lightgcn, u0_i0, u1_i1, u0_i1, u0_u2, u0_sum_u123 (got '" +
                *v + "')");
        }
    }
    if (const std::string* v = get("layers")) {
        if (*v == "auto") {
            c.layers = -1;
        } else {
            parse_i("layers", c.layers, 0, 16);
        }
    }
    parse_i("embedding_dim", c.dim, 1, 4096);
    parse_f("learning_rate", c.lr, [](double x) { return x > 0; }, "expected a positive number");
    parse_i("batch_size", c.batch_size, 1, int64_t(1) << 30);
    parse_f("tau", c.hyper.tau, [](double x) { return x > 0; }, "expected a positive number");
    parse_f("alpha", c.hyper.alpha, [](double x) { return x >= 0 && x <= 1; },
            "expected a number in [0, 1]");
    if (!get("lambda1")) {
        errors.push_back("missing required key: lambda1");
    } else {
        parse_f("lambda1", c.hyper.lambda1, [](double x) { return x >= 0; },
                "expected a number >= 0");
    }
    parse_f("lambda2", c.hyper.lambda2, [](double x) { return x >= 0; },
            "expected a number >= 0");
    parse_i("patience", c.patience, 1, 1 << 20);
    parse_i("eval_every", c.eval_every, 1, 1 << 20);
    parse_i("max_epochs", c.max_epochs, 1, 1 << 20);
    parse_u64("seed_init", c.seed_init);
    parse_u64("seed_sample", c.seed_sample);
    parse_b("early_stopping", c.early_stopping);
    if (const std::string* v = get("readout_mode")) {
        if (*v == "mean") {
            c.readout_mode = ReadoutMode::MeanLayers;
        } else if (*v == "layer0") {
            c.readout_mode = ReadoutMode::Layer0;
        } else {
            errors.push_back("readout_mode: expected mean or layer0 (got '" + *v + "')");
        }
    }
    if (const std::string* v = get("precision")) {
        if (*v == "32") {
            c.precision = 32;
        } else if (*v == "64") {
            c.precision = 64;
        } else {
            errors.push_back("precision: expected 32 or 64 (got '" + *v + "')");
        }
    }
    parse_i("workers", c.workers, 1, 256);
    parse_b("debug_checks", c.debug_checks);
    return out;
}

std::string canonical_config(const TrainConfig& c) {
    char buf[128];
    std::ostringstream os;
    os << "scheme = " << scheme_name(c.scheme) << '\n';
    os << "layers = " << c.effective_layers() << '\n';
    os << "embedding_dim = " << c.dim << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", c.lr);
    os << "learning_rate = " << buf << '\n';
    os << "batch_size = " << c.batch_size << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", c.hyper.tau);
    os << "tau = " << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", c.hyper.alpha);
    os << "alpha = " << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", c.hyper.lambda1);
    os << "lambda1 = " << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", c.hyper.lambda2);
    os << "lambda2 = " << buf << '\n';
    os << "patience = " << c.patience << '\n';
    os << "eval_every = " << c.eval_every << '\n';
    os << "max_epochs = " << c.max_epochs << '\n';
    os << "seed_init = " << c.seed_init << '\n';
    os << "seed_sample = " << c.seed_sample << '\n';
    os << "early_stopping = " << (c.early_stopping ? "true" : "false") << '\n';
    os << "readout_mode = " << (c.readout_mode == ReadoutMode::MeanLayers ? "mean" : "layer0")
       << '\n';
    os << "precision = " << c.precision << '\n';
    os << "workers = " << c.workers << '\n';
    os << "debug_checks = " << (c.debug_checks ? "true" : "false") << '\n';
    return os.str();
}

uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t k = 0; k < len; ++k) {
        h ^= p[k];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize k = 0; k < got; ++k) {
            h ^= static_cast<unsigned char>(buf[k]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

uint64_t config_hash(const TrainConfig& cfg) {
    const std::string s = canonical_config(cfg);
    return fnv1a64(s.data(), s.size());
}

}  // namespace l2cl
