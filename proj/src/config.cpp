#include "roiattn/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace roiattn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v, const std::string& line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("invalid boolean in config line: \"" + line + "\"");
}

template <typename T>
T parse_number(const std::string& v, const std::string& line) {
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
        try {
            size_t pos = 0;
            out = T(std::stod(v, &pos));
            if (pos != v.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("invalid number in config line: \"" + line + "\"");
        }
    } else {
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size()) {
            throw ConfigError("invalid integer in config line: \"" + line + "\"");
        }
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& v, const std::string& line) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty()) throw ConfigError("invalid list in config line: \"" + line + "\"");
        out.push_back(parse_number<int>(part, line));
    }
    return out;
}

void apply_key(DetectionConfig& cfg, const std::string& key, const std::string& value,
               const std::string& line) {
    if (key == "d") cfg.d = parse_number<int>(value, line);
    else if (key == "depth") cfg.depth = parse_number<int>(value, line);
    else if (key == "reg_scale") cfg.reg_scale = parse_number<float>(value, line);
    else if (key == "use_double_head") cfg.use_double_head = parse_bool(value, line);
    else if (key == "use_pos_encoding") cfg.use_pos_encoding = parse_bool(value, line);
    else if (key == "attach_attention_cls") cfg.attach_attention_cls = parse_bool(value, line);
    else if (key == "attach_attention_reg") cfg.attach_attention_reg = parse_bool(value, line);
    else if (key == "lr") cfg.lr = parse_number<float>(value, line);
    else if (key == "momentum") cfg.momentum = parse_number<float>(value, line);
    else if (key == "weight_decay") cfg.weight_decay = parse_number<float>(value, line);
    else if (key == "epochs") cfg.epochs = parse_number<int>(value, line);
    else if (key == "lr_decay_epochs") cfg.lr_decay_epochs = parse_int_list(value, line);
    else if (key == "seed") cfg.seed = parse_number<uint64_t>(value, line);
    else if (key == "train_scenes") cfg.train_scenes = parse_number<int>(value, line);
    else if (key == "val_scenes") cfg.val_scenes = parse_number<int>(value, line);
    else if (key == "backbone_channels") cfg.backbone_channels = parse_number<int>(value, line);
    else if (key == "fc_hidden") cfg.fc_hidden = parse_number<int>(value, line);
    else if (key == "reg_mid") cfg.reg_mid = parse_number<int>(value, line);
    else if (key == "reg_expand") cfg.reg_expand = parse_number<int>(value, line);
    else throw ConfigError("unknown key in config line: \"" + line + "\"");
}

}  // namespace

void DetectionConfig::validate() const {
    if (d < 1) throw ConfigError("d must be >= 1");
    if (depth < 0) throw ConfigError("depth must be >= 0");
    if (reg_scale <= 0.0f) throw ConfigError("reg_scale must be positive");
    if (lr < 0.0f) throw ConfigError("lr must be >= 0");
    if (momentum < 0.0f || momentum >= 1.0f) throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0f) throw ConfigError("weight_decay must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (train_scenes < 1 || val_scenes < 1) throw ConfigError("scene counts must be >= 1");
    if (backbone_channels < 1 || fc_hidden < 1 || reg_mid < 1 || reg_expand < 1) {
        throw ConfigError("layer widths must be >= 1");
    }
    if (use_pos_encoding && !use_double_head) {
        throw ConfigError("use_pos_encoding requires use_double_head "
                          "(only regression-branch features are encoded)");
    }
    for (int e : lr_decay_epochs) {
        if (e < 1) throw ConfigError("lr_decay_epochs entries must be >= 1");
    }
}

DetectionConfig parse_config_text(const std::string& text) {
    DetectionConfig cfg;
    std::stringstream ss(text);
    std::string raw;
    while (std::getline(ss, raw)) {
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected `key = value` in config line: \"" + raw + "\"");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("expected `key = value` in config line: \"" + raw + "\"");
        }
        apply_key(cfg, key, value, raw);
    }
    return cfg;
}

DetectionConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << is.rdbuf();
    return parse_config_text(buffer.str());
}

std::string config_to_text(const DetectionConfig& cfg) {
    std::ostringstream os;
    char buf[64];
    auto put_f = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s = %g\n", key, v);
        os << buf;
    };
    os << "d = " << cfg.d << "\n";
    os << "depth = " << cfg.depth << "\n";
    put_f("reg_scale", cfg.reg_scale);
    os << "use_double_head = " << (cfg.use_double_head ? "true" : "false") << "\n";
    os << "use_pos_encoding = " << (cfg.use_pos_encoding ? "true" : "false") << "\n";
    os << "attach_attention_cls = " << (cfg.attach_attention_cls ? "true" : "false") << "\n";
    os << "attach_attention_reg = " << (cfg.attach_attention_reg ? "true" : "false") << "\n";
    put_f("lr", cfg.lr);
    put_f("momentum", cfg.momentum);
    put_f("weight_decay", cfg.weight_decay);
    os << "epochs = " << cfg.epochs << "\n";
    os << "lr_decay_epochs = ";
    for (size_t i = 0; i < cfg.lr_decay_epochs.size(); ++i) {
        os << (i ? "," : "") << cfg.lr_decay_epochs[i];
    }
    os << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "train_scenes = " << cfg.train_scenes << "\n";
    os << "val_scenes = " << cfg.val_scenes << "\n";
    os << "backbone_channels = " << cfg.backbone_channels << "\n";
    os << "fc_hidden = " << cfg.fc_hidden << "\n";
    os << "reg_mid = " << cfg.reg_mid << "\n";
    os << "reg_expand = " << cfg.reg_expand << "\n";
    return os.str();
}

}  // namespace roiattn
