// SPDX-License-Identifier: Apache-2.0
#include "turbodsa/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "turbodsa/errors.hpp"

namespace turbodsa {

using nlohmann::json;

namespace {

template <typename T>
void read_into(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_model(const json& j, ModelSpec& m) {
    read_into(j, "architecture", m.architecture);
    read_into(j, "d1", m.d1);
    read_into(j, "d2", m.d2);
    read_into(j, "d3", m.d3);
    read_into(j, "d4", m.d4);
    read_into(j, "d5", m.vocab_size);
    read_into(j, "heads", m.heads);
    read_into(j, "encoder_layers", m.encoder_layers);
    read_into(j, "decoder_layers", m.decoder_layers);
    read_into(j, "ff_dim", m.ff_dim);
    read_into(j, "conv_channels", m.conv_channels);
    read_into(j, "conv_layers", m.conv_layers);
    read_into(j, "conv_kernel", m.conv_kernel);
    read_into(j, "turbo_iterations", m.turbo_iterations);
    read_into(j, "interleaver_seed", m.interleaver_seed);
    read_into(j, "tie_decoder_interleavers", m.tie_decoder_interleavers);
    read_into(j, "dense_layers", m.dense_layers);
    read_into(j, "cnn_ae_layers", m.cnn_ae_layers);
}

void parse_channel(const json& j, ChannelConfig& c) {
    if (j.contains("family")) c.family = channel_family_from_string(j.at("family").get<std::string>());
    read_into(j, "snr_db", c.snr_db);
    read_into(j, "rician_k", c.rician_k);
    if (j.contains("fading")) {
        const std::string g = j.at("fading").get<std::string>();
        if (g == "per_symbol")
            c.granularity = FadingGranularity::per_symbol;
        else if (g == "per_sentence")
            c.granularity = FadingGranularity::per_sentence;
        else
            throw ConfigError("unknown fading granularity: " + g);
    }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("corpus")) {
            const auto& c = j.at("corpus");
            read_into(c, "path", cfg.corpus_path);
            read_into(c, "vocab", cfg.vocab_path);
            read_into(c, "min_freq", cfg.min_freq);
            read_into(c, "max_len", cfg.max_len);
            read_into(c, "validation_fraction", cfg.validation_fraction);
        }
        if (j.contains("model")) parse_model(j.at("model"), cfg.model);
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            read_into(o, "name", cfg.optimizer);
            read_into(o, "learning_rate", cfg.learning_rate);
        }
        if (j.contains("training")) {
            const auto& t = j.at("training");
            read_into(t, "batch_size", cfg.batch_size);
            read_into(t, "epochs", cfg.epochs);
            read_into(t, "target_loss", cfg.target_loss);
            if (t.contains("seeds")) cfg.seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
        }
        if (j.contains("channel")) parse_channel(j.at("channel"), cfg.channel);
        if (j.contains("output")) {
            const auto& o = j.at("output");
            read_into(o, "checkpoint_dir", cfg.checkpoint_dir);
            read_into(o, "output_dir", cfg.output_dir);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

void RunConfig::validate() const {
    if (optimizer != "adam") throw ConfigError("unsupported optimizer: " + optimizer);
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (max_len < 3) throw ConfigError("max_len must be at least 3");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw ConfigError("validation_fraction must be in [0, 1)");
    if (seeds.empty()) throw ConfigError("at least one seed required");
    if (model.heads == 0 || model.d1 % model.heads != 0)
        throw ConfigError("heads must divide d1");
    if (model.architecture != "turbo-dsa" && model.architecture != "dsa" &&
        model.architecture != "deepsc" && model.architecture != "cnn-ae")
        throw ConfigError("unknown architecture: " + model.architecture);
    if (model.turbo_iterations < 1) throw ConfigError("turbo_iterations must be at least 1");
    if (model.conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
    if ((3 * model.d2) % 2 != 0)
        throw ConfigError("channel width 3*d2 must be even for complex pairing");
}

std::uint64_t RunConfig::fingerprint(std::size_t resolved_vocab) const {
    // shape-affecting fields only; runtime knobs like turbo_iterations or the
    // training SNR do not change parameter layouts
    std::ostringstream s;
    s << model.architecture << '|' << max_len << '|' << model.d1 << '|' << model.d2 << '|'
      << model.d3 << '|' << model.d4 << '|' << resolved_vocab << '|' << model.heads << '|'
      << model.encoder_layers << '|' << model.decoder_layers << '|' << model.resolved_ff_dim()
      << '|' << model.conv_channels << '|' << model.conv_layers << '|' << model.conv_kernel
      << '|' << model.dense_layers << '|' << model.cnn_ae_layers << '|'
      << model.interleaver_seed << '|' << model.tie_decoder_interleavers;
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s.str()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<double> parse_snr_grid(const std::string& text) {
    const auto parse_num = [](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw ConfigError("malformed SNR grid: " + s);
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("malformed SNR grid: " + s);
        }
    };

    const std::size_t c1 = text.find(':');
    if (c1 == std::string::npos) return {parse_num(text)};
    const std::size_t c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ConfigError("malformed SNR grid: " + text);
    const double start = parse_num(text.substr(0, c1));
    const double stop = parse_num(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = parse_num(text.substr(c2 + 1));
    if (!(step > 0.0)) throw ConfigError("SNR grid step must be positive");
    if (stop < start) throw ConfigError("SNR grid stop must not precede start");
    std::vector<double> out;
    for (double v = start; v <= stop + 1e-9; v += step) out.push_back(v);
    return out;
}

}  // namespace turbodsa
