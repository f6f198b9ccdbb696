#include "capspoe/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "capspoe/error.hpp"

namespace capspoe {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config: key '" + key + "' needs an unsigned integer, got '" + v + "'");
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
    }
}

} // namespace

void RunConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw ConfigError(std::string("config: ") + name + " must be positive");
    };
    positive(ae_learning_rate, "autoencoder learning_rate");
    positive(caps_learning_rate, "capsules learning_rate");
    positive(ae_decay, "autoencoder decay");
    positive(caps_decay, "capsules decay");
    if (ae_decay > 1.0 || caps_decay > 1.0) throw ConfigError("config: decay must be in (0,1]");
    if (ae_momentum < 0.0 || ae_momentum >= 1.0 || caps_momentum < 0.0 || caps_momentum >= 1.0)
        throw ConfigError("config: momentum must be in [0,1)");
    if (ae_l2 < 0.0 || caps_l2 < 0.0) throw ConfigError("config: l2 must be nonnegative");
    if (!(ae_dropout >= 0.0 && ae_dropout < 1.0))
        throw ConfigError("config: dropout must be in [0,1)");
    if (!(ae_leaky_slope > 0.0 && ae_leaky_slope < 1.0))
        throw ConfigError("config: leaky_slope must be in (0,1)");
    if (caps_count < 1 || caps_dim < 1) throw ConfigError("config: capsules/capsule_dim >= 1");
    if (routing_iterations < 1) throw ConfigError("config: routing_iterations >= 1");
    if (ae_epochs < 1 || caps_epochs < 1) throw ConfigError("config: epochs >= 1");
    if (ae_batch < 1 || caps_batch < 1) throw ConfigError("config: batch >= 1");
    if (samples_per_capsule < 1) throw ConfigError("config: samples_per_capsule >= 1");
    if (threads < 0) throw ConfigError("config: threads must be >= 0");
    if (kernels != "auto" && kernels != "scalar" && kernels != "avx2")
        throw ConfigError("config: kernels must be auto|scalar|avx2");
    if (dataset_name != "mnist" && dataset_name != "fashion-mnist" && dataset_name != "cifar10")
        throw ConfigError("config: dataset name must be mnist|fashion-mnist|cifar10");
}

std::string RunConfig::to_text() const {
    char buf[128];
    std::ostringstream os;
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "[run]\n";
    os << "seed = " << seed << "\n";
    os << "out_dir = " << out_dir << "\n";
    os << "threads = " << threads << "\n";
    os << "kernels = " << kernels << "\n";
    os << "\n[dataset]\n";
    os << "name = " << dataset_name << "\n";
    os << "path = " << dataset_path << "\n";
    os << "file = " << dataset_file << "\n";
    os << "limit = " << dataset_limit << "\n";
    os << "\n[autoencoder]\n";
    os << "epochs = " << ae_epochs << "\n";
    os << "batch = " << ae_batch << "\n";
    os << "learning_rate = " << num(ae_learning_rate) << "\n";
    os << "momentum = " << num(ae_momentum) << "\n";
    os << "decay = " << num(ae_decay) << "\n";
    os << "l2 = " << num(ae_l2) << "\n";
    os << "dropout = " << num(ae_dropout) << "\n";
    os << "leaky_slope = " << num(ae_leaky_slope) << "\n";
    os << "\n[capsules]\n";
    os << "epochs = " << caps_epochs << "\n";
    os << "batch = " << caps_batch << "\n";
    os << "learning_rate = " << num(caps_learning_rate) << "\n";
    os << "momentum = " << num(caps_momentum) << "\n";
    os << "decay = " << num(caps_decay) << "\n";
    os << "l2 = " << num(caps_l2) << "\n";
    os << "capsules = " << caps_count << "\n";
    os << "capsule_dim = " << caps_dim << "\n";
    os << "routing_iterations = " << routing_iterations << "\n";
    os << "\n[generate]\n";
    os << "samples_per_capsule = " << samples_per_capsule << "\n";
    return os.str();
}

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig cfg;
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    static const std::map<std::string, Setter> setters = {
        {"run.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
        {"run.out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        {"run.threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = parse_int(k, v); }},
        {"run.kernels", [](RunConfig& c, const std::string&, const std::string& v) { c.kernels = v; }},
        {"dataset.name", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_name = v; }},
        {"dataset.path", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_path = v; }},
        {"dataset.file", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_file = v; }},
        {"dataset.limit", [](RunConfig& c, const std::string& k, const std::string& v) { c.dataset_limit = parse_u64(k, v); }},
        {"autoencoder.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_epochs = parse_u64(k, v); }},
        {"autoencoder.batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_batch = parse_u64(k, v); }},
        {"autoencoder.learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_learning_rate = parse_double(k, v); }},
        {"autoencoder.momentum", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_momentum = parse_double(k, v); }},
        {"autoencoder.decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_decay = parse_double(k, v); }},
        {"autoencoder.l2", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_l2 = parse_double(k, v); }},
        {"autoencoder.dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_dropout = parse_double(k, v); }},
        {"autoencoder.leaky_slope", [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_leaky_slope = parse_double(k, v); }},
        {"capsules.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_epochs = parse_u64(k, v); }},
        {"capsules.batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_batch = parse_u64(k, v); }},
        {"capsules.learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_learning_rate = parse_double(k, v); }},
        {"capsules.momentum", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_momentum = parse_double(k, v); }},
        {"capsules.decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_decay = parse_double(k, v); }},
        {"capsules.l2", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_l2 = parse_double(k, v); }},
        {"capsules.capsules", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_count = parse_u64(k, v); }},
        {"capsules.capsule_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.caps_dim = parse_u64(k, v); }},
        {"capsules.routing_iterations", [](RunConfig& c, const std::string& k, const std::string& v) { c.routing_iterations = parse_int(k, v); }},
        {"generate.samples_per_capsule", [](RunConfig& c, const std::string& k, const std::string& v) { c.samples_per_capsule = parse_u64(k, v); }},
    };
    static const std::set<std::string> sections = {"run", "dataset", "autoencoder", "capsules",
                                                   "generate"};

    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
            section = trim(t.substr(1, t.size() - 2));
            if (!sections.count(section))
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": key outside a section");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        std::string full = section + "." + key;
        auto it = setters.find(full);
        if (it == setters.end())
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + full +
                              "'");
        if (!seen.insert(full).second)
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" +
                              full + "'");
        it->second(cfg, full, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

} // namespace capspoe
