#include "elbnn/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace elbnn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& config_defaults() {
    static const std::map<std::string, std::string> defaults = {
        {"model.arch", "el_bottleneck_tiny"},
        {"model.input_size", "0"},   // 0 = family default (32 tiny, 224 resnet50)
        {"model.num_classes", "0"},  // 0 = family default (10 tiny, 1000 resnet50)
        {"model.el_s", "on"},
        {"model.el_i", "on"},
        {"model.el_e", "on"},
        {"model.residual", "on"},
        {"model.gamma_learnable", "on"},
        {"model.k_s", "on"},
        {"model.alpha", "on"},
        {"model.squeeze_grouping", "gamma_consistent"},
        {"model.mobilenet_k_s", "off"},
        {"train.dataset", "cifar10_bin"},
        {"train.data_dir", "data"},
        {"train.epochs", "40"},
        {"train.batch_size", "50"},
        {"train.base_lr", "0.001"},
        {"train.decay_epochs", "20,32"},
        {"train.seed", "42"},
        {"train.train_limit", "0"},
        {"train.test_limit", "0"},
        {"train.checkpoint_every", "0"},
        {"train.metrics_every", "50"},
        {"train.eval_every", "1"},
        {"train.augment", "on"},
        {"train.bn_batch_stats", "on"},
        {"output.dir", "runs/out"},
    };
    return defaults;
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw std::invalid_argument("config: unknown key " + key);
    return it->second;
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw std::invalid_argument("config: " + key + " expects on/off, got '" + v + "'");
}

int RunConfig::get_int(const std::string& key) const {
    return std::stoi(get(key));
}

float RunConfig::get_float(const std::string& key) const {
    return std::stof(get(key));
}

void parse_config_text(const std::string& text, const std::string& source,
                       std::map<std::string, std::string>& out) {
    const auto& known = config_defaults();
    std::istringstream is(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = trim(raw);
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                            ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        if (known.find(key) == known.end())
            throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                        ": unknown key '" + key + "'");
        out[key] = value;
    }
}

RunConfig make_run_config(const std::string& subcommand, const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          const std::string& out_dir) {
    RunConfig cfg;
    cfg.subcommand = subcommand;
    cfg.config_path = config_path;
    cfg.values = config_defaults();
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw std::invalid_argument("config: cannot open " + config_path);
        std::stringstream ss;
        ss << is.rdbuf();
        parse_config_text(ss.str(), config_path, cfg.values);
    }
    for (const std::string& ov : overrides) parse_config_text(ov, "<override>", cfg.values);
    cfg.out_dir = out_dir.empty() ? cfg.values.at("output.dir") : out_dir;
    cfg.values["output.dir"] = cfg.out_dir;
    return cfg;
}

std::string emit_manifest(const RunConfig& cfg) {
    std::string out = "# run manifest (subcommand: " + cfg.subcommand + ")\n";
    std::string section;
    for (const auto& [key, value] : cfg.values) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

ArchSpec arch_from_config(const RunConfig& cfg) {
    ArchSpec arch;
    arch.family = cfg.get("model.arch");
    const bool big = arch.family == "el_resnet50" || arch.family == "bi_resnet50";
    const int hw = cfg.get_int("model.input_size");
    const int classes = cfg.get_int("model.num_classes");
    arch.input_hw = hw > 0 ? hw : (big ? 224 : 32);
    arch.num_classes = classes > 0 ? classes : (big ? 1000 : 10);
    arch.toggles.el_s = cfg.get_bool("model.el_s");
    arch.toggles.el_i = cfg.get_bool("model.el_i");
    arch.toggles.el_e = cfg.get_bool("model.el_e");
    arch.toggles.residual = cfg.get_bool("model.residual");
    arch.toggles.gamma_learnable = cfg.get_bool("model.gamma_learnable");
    arch.toggles.k_s = cfg.get_bool("model.k_s");
    arch.toggles.alpha = cfg.get_bool("model.alpha");
    arch.toggles.mobilenet_k_s = cfg.get_bool("model.mobilenet_k_s");
    const std::string& grouping = cfg.get("model.squeeze_grouping");
    if (grouping == "gamma_consistent")
        arch.toggles.grouping = SqueezeGrouping::gamma_consistent;
    else if (grouping == "literal_sentence")
        arch.toggles.grouping = SqueezeGrouping::literal_sentence;
    else
        throw std::invalid_argument("config: bad squeeze_grouping '" + grouping + "'");
    return arch;
}

TrainConfig train_from_config(const RunConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.get_int("train.epochs");
    t.batch_size = cfg.get_int("train.batch_size");
    t.base_lr = cfg.get_float("train.base_lr");
    t.decay_epochs.clear();
    std::istringstream ds(cfg.get("train.decay_epochs"));
    std::string tok;
    while (std::getline(ds, tok, ','))
        if (!tok.empty()) t.decay_epochs.push_back(std::stoi(tok));
    for (size_t i = 1; i < t.decay_epochs.size(); ++i)
        if (t.decay_epochs[i] <= t.decay_epochs[i - 1])
            throw std::invalid_argument("config: decay_epochs must be strictly increasing");
    t.seed = uint64_t(std::stoull(cfg.get("train.seed")));
    t.dataset = cfg.get("train.dataset");
    t.data_dir = cfg.get("train.data_dir");
    t.train_limit = cfg.get_int("train.train_limit");
    t.test_limit = cfg.get_int("train.test_limit");
    t.checkpoint_every = cfg.get_int("train.checkpoint_every");
    t.metrics_every = cfg.get_int("train.metrics_every");
    t.eval_every = cfg.get_int("train.eval_every");
    t.use_augment = cfg.get_bool("train.augment");
    t.bn_batch_stats = cfg.get_bool("train.bn_batch_stats");
    return t;
}

}  // namespace elbnn
