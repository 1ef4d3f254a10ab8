#pragma once

// Scenario files: flat key-value text with [section] headers. Sections are
// [emitter], [mode.s], [mode.p], [grid] and [stack.N] (one per layer, N from
// 0). Parse errors carry the source name and line number. The same format
// doubles as the stack description consumed by the greens subcommand.

#include <map>
#include <sstream>
#include <string>

#include "bimodal/domain.hpp"
#include "bimodal/format.hpp"

namespace bimodal {

namespace detail {

struct ScenarioBuilder {
    ScenarioConfig cfg;
    std::map<int, Layer> stack_layers;
    bool have_stack = false;
    int emitter_layer = 0;

    void finish(const std::string& source) {
        if (have_stack) {
            LayerStack st;
            int expect = 0;
            for (const auto& [idx, layer] : stack_layers) {
                if (idx != expect)
                    throw ConfigError(source + ": stack layers must be contiguous from 0, missing [stack." +
                                      std::to_string(expect) + "]");
                st.layers.push_back(layer);
                ++expect;
            }
            st.emitter_layer = emitter_layer;
            cfg.stack = std::move(st);
        }
    }
};

inline CavityModeSpec& mode_slot(ScenarioConfig& cfg, Polarization q) {
    for (auto& m : cfg.modes)
        if (m.polarization == q) return m;
    CavityModeSpec m;
    m.polarization = q;
    // keep file order independent of polarization order: s first
    cfg.modes.push_back(m);
    if (cfg.modes.size() == 2 && cfg.modes[0].polarization == Polarization::p)
        std::swap(cfg.modes[0], cfg.modes[1]);
    for (auto& mm : cfg.modes)
        if (mm.polarization == q) return mm;
    return cfg.modes.back();
}

} // namespace detail

inline ScenarioConfig parse_scenario_text(const std::string& text, const std::string& source) {
    detail::ScenarioBuilder b;
    b.cfg.label = source;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    bool gamma_rad_seen[2] = {false, false};

    while (std::getline(in, raw)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.rfind("stack.", 0) == 0) {
                const int idx =
                    static_cast<int>(parse_int_strict(section.substr(6), where));
                if (idx < 0) throw ConfigError(where + ": negative stack layer index");
                b.stack_layers.emplace(idx, Layer{});
                b.have_stack = true;
            } else if (section != "emitter" && section != "mode.s" && section != "mode.p" &&
                       section != "grid") {
                throw ConfigError(where + ": unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError(where + ": key '" + key + "' outside any section");

        auto num = [&]() { return parse_double_strict(value, where); };

        if (section == "emitter") {
            if (key == "omega21")
                b.cfg.emitter.omega21 = num();
            else if (key == "z_position")
                b.cfg.emitter.z_position = num();
            else if (key == "layer")
                b.emitter_layer = static_cast<int>(parse_int_strict(value, where));
            else if (key == "dipole") {
                const auto parts = split_whitespace(value);
                if (parts.size() != 3)
                    throw ConfigError(where + ": dipole needs three components");
                for (int i = 0; i < 3; ++i)
                    b.cfg.emitter.dipole_orientation[i] =
                        parse_double_strict(parts[i], where);
            } else
                throw ConfigError(where + ": unknown key '" + key + "' in [emitter]");
        } else if (section == "mode.s" || section == "mode.p") {
            const Polarization q =
                section == "mode.s" ? Polarization::s : Polarization::p;
            auto& m = detail::mode_slot(b.cfg, q);
            if (key == "omega")
                m.resonance.omega = num();
            else if (key == "gamma_total")
                m.resonance.gamma_total = num();
            else if (key == "gamma_rad") {
                m.resonance.gamma_rad = num();
                gamma_rad_seen[static_cast<int>(q)] = true;
            } else if (key == "rabi")
                m.rabi = num();
            else
                throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
        } else if (section == "grid") {
            if (key == "t_max")
                b.cfg.grid.t_max = num();
            else if (key == "n_time")
                b.cfg.grid.n_time = static_cast<int>(parse_int_strict(value, where));
            else if (key == "omega_min")
                b.cfg.grid.omega_min = num();
            else if (key == "omega_max")
                b.cfg.grid.omega_max = num();
            else if (key == "n_omega")
                b.cfg.grid.n_omega = static_cast<int>(parse_int_strict(value, where));
            else if (key == "k_transverse")
                b.cfg.grid.k_transverse = num();
            else
                throw ConfigError(where + ": unknown key '" + key + "' in [grid]");
        } else if (section.rfind("stack.", 0) == 0) {
            const int idx = static_cast<int>(parse_int_strict(section.substr(6), where));
            auto& layer = b.stack_layers[idx];
            if (key == "eps") {
                const auto parts = split_whitespace(value);
                if (parts.size() != 2)
                    throw ConfigError(where + ": eps needs 're im'");
                layer.permittivity.background = {parse_double_strict(parts[0], where),
                                                 parse_double_strict(parts[1], where)};
            } else if (key == "lorentz") {
                const auto parts = split_whitespace(value);
                if (parts.size() != 3)
                    throw ConfigError(where + ": lorentz needs 'strength omega width'");
                layer.permittivity.osc_strength = parse_double_strict(parts[0], where);
                layer.permittivity.osc_omega = parse_double_strict(parts[1], where);
                layer.permittivity.osc_width = parse_double_strict(parts[2], where);
            } else if (key == "thickness") {
                layer.thickness = num();
            } else
                throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
        }
    }

    // per the presets, an unspecified radiative width defaults to the total
    for (auto& m : b.cfg.modes)
        if (!gamma_rad_seen[static_cast<int>(m.polarization)])
            m.resonance.gamma_rad = m.resonance.gamma_total;

    b.finish(source);
    return b.cfg;
}

inline std::string serialize_scenario(const ScenarioConfig& cfg) {
    std::string out;
    auto kv = [&out](const char* key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    };

    out += "[emitter]\n";
    kv("omega21", format_double(cfg.emitter.omega21));
    if (cfg.stack.has_value()) {
        kv("z_position", format_double(cfg.emitter.z_position));
        kv("layer", format_int(cfg.stack->emitter_layer));
        kv("dipole", format_double(cfg.emitter.dipole_orientation[0]) + " " +
                         format_double(cfg.emitter.dipole_orientation[1]) + " " +
                         format_double(cfg.emitter.dipole_orientation[2]));
    }
    for (const auto& m : cfg.modes) {
        out += std::string("\n[mode.") + name(m.polarization) + "]\n";
        kv("omega", format_double(m.resonance.omega));
        kv("gamma_total", format_double(m.resonance.gamma_total));
        kv("gamma_rad", format_double(m.resonance.gamma_rad));
        kv("rabi", format_double(m.rabi));
    }
    out += "\n[grid]\n";
    kv("t_max", format_double(cfg.grid.t_max));
    kv("n_time", format_int(cfg.grid.n_time));
    kv("omega_min", format_double(cfg.grid.omega_min));
    kv("omega_max", format_double(cfg.grid.omega_max));
    kv("n_omega", format_int(cfg.grid.n_omega));
    kv("k_transverse", format_double(cfg.grid.k_transverse));
    if (cfg.stack.has_value()) {
        for (std::size_t j = 0; j < cfg.stack->layers.size(); ++j) {
            const auto& layer = cfg.stack->layers[j];
            out += "\n[stack." + std::to_string(j) + "]\n";
            kv("eps", format_double(layer.permittivity.background.real()) + " " +
                          format_double(layer.permittivity.background.imag()));
            if (layer.permittivity.osc_strength != 0.0)
                kv("lorentz", format_double(layer.permittivity.osc_strength) + " " +
                                  format_double(layer.permittivity.osc_omega) + " " +
                                  format_double(layer.permittivity.osc_width));
            if (layer.thickness.has_value()) kv("thickness", format_double(*layer.thickness));
        }
    }
    return out;
}

} // namespace bimodal
