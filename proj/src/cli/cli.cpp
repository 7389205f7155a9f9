#include "hsdf/cli/cli.hpp"

#include "command.hpp"
#include "hsdf/geom/error.hpp"
#include "hsdf/geom/io.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <iostream>
#include <map>
#include <memory>
#include <stdexcept>

namespace hsdf::cli {

namespace {

// Comma-separated list; each item is read as JSON when it parses, else as text.
json parse_list(const std::string& text)
{
    json out = json::array();
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find(',', start), text.size());
        const std::string item = text.substr(start, end - start);
        const json v = json::parse(item, nullptr, false);
        out.push_back(v.is_discarded() ? json(item) : v);
        start = end + 1;
    }
    return out;
}

// Whole-string numeric parse; "1.5" is not an integer and "3x" is not a number.
template <class T, class F>
T parse_all(const std::string& text, F conv)
{
    std::size_t used = 0;
    const T v = conv(text, &used);
    if (used != text.size()) {
        throw std::invalid_argument(text);
    }
    return v;
}

json parse_flag(const Param& p, const std::string& text)
{
    if (p.def.is_array() && !text.empty() && text.front() != '[') {
        return parse_list(text);
    }
    try {
        switch (p.def.type()) {
        case json::value_t::number_integer:
            return parse_all<long long>(text, [](const std::string& t, std::size_t* n) { return std::stoll(t, n); });
        case json::value_t::number_unsigned:
            return parse_all<unsigned long long>(
                text, [](const std::string& t, std::size_t* n) { return std::stoull(t, n); });
        case json::value_t::number_float:
            return parse_all<double>(text, [](const std::string& t, std::size_t* n) { return std::stod(t, n); });
        case json::value_t::array:
        case json::value_t::object:
            return json::parse(text);
        default:
            return text;
        }
    } catch (const std::exception&) {
        throw UsageError("bad value for --" + p.name + ": " + text);
    }
}

bool same_kind(const json& a, const json& b)
{
    if (a.is_null() || b.is_null()) {
        return true;
    }
    if (a.is_number() && b.is_number()) {
        return !(a.is_number_integer() && b.is_number_float());
    }
    return a.type() == b.type();
}

// Defaults, then the config file, then the flags given on the command line.
json merge_config(const Command& cmd, const std::string& config_path, const std::map<std::string, std::string>& text,
                  const std::map<std::string, bool>& switches, const CLI::App& app)
{
    json cfg = json::object();
    for (const auto& p : cmd.params) {
        cfg[p.name] = p.def;
    }
    if (!config_path.empty()) {
        json file;
        try {
            file = io::read_json(config_path);
        } catch (const std::exception& e) {
            throw UsageError(std::string("cannot read config: ") + e.what());
        }
        if (!file.is_object()) {
            throw UsageError("config file must hold a JSON object");
        }
        for (const auto& [key, value] : file.items()) {
            if (!cfg.contains(key)) {
                throw UsageError("unknown config key '" + key + "' for " + cmd.name);
            }
            if (!same_kind(cfg[key], value)) {
                throw UsageError("config key '" + key + "' has the wrong type");
            }
            cfg[key] = value;
        }
    }
    for (const auto& p : cmd.params) {
        if (app.get_option("--" + p.name)->count() == 0) {
            continue;
        }
        cfg[p.name] = p.def.is_boolean() ? json(switches.at(p.name)) : parse_flag(p, text.at(p.name));
    }
    for (const auto& p : cmd.params) {
        if (p.required && (cfg[p.name].is_null() || (cfg[p.name].is_string() && cfg[p.name].get<std::string>().empty()))) {
            throw UsageError("--" + p.name + " is required");
        }
    }
    return cfg;
}

std::string usage(const std::vector<Command>& cmds)
{
    std::string s = "usage: hsdf <command> [options]\n\ncommands:\n";
    for (const auto& c : cmds) {
        s += "  " + c.name + std::string(c.name.size() < 14 ? 14 - c.name.size() : 1, ' ') + c.help + "\n";
    }
    s += "\nRun 'hsdf <command> --help' for the options of a command.\n";
    return s;
}

} // namespace

Param out_param(const std::string& help) { return {"out", nullptr, help, true}; }
Param seed_param() { return {"seed", 0, "random seed"}; }

void write_run_record(const fs::path& dir, const std::string& command, const json& cfg)
{
    fs::create_directories(dir);
    json versions = {{"hsdf", HSDF_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"cli11", CLI11_VERSION},
                     {"compiler", __VERSION__}};
    io::write_json(dir / "run.json", {{"command", command},
                                      {"config", cfg},
                                      {"seed", cfg.value("seed", json(nullptr))},
                                      {"versions", versions}});
}

int run(const std::vector<std::string>& args)
{
    std::vector<Command> cmds = data_commands();
    for (auto& c : model_commands()) {
        cmds.push_back(std::move(c));
    }
    if (args.empty()) {
        std::cerr << usage(cmds);
        return 1;
    }
    if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        std::cout << usage(cmds);
        return 0;
    }
    const auto it = std::find_if(cmds.begin(), cmds.end(), [&](const Command& c) { return c.name == args[0]; });
    if (it == cmds.end()) {
        std::cerr << "unknown command '" << args[0] << "'\n\n" << usage(cmds);
        return 1;
    }
    const Command& cmd = *it;

    CLI::App app(cmd.help, "hsdf " + cmd.name);
    std::string config_path;
    std::map<std::string, std::string> text;
    std::map<std::string, bool> switches;
    app.add_option("--config", config_path, "JSON file with option values; flags win");
    for (const auto& p : cmd.params) {
        std::string help = p.help;
        if (!p.def.is_null() && !p.def.is_boolean()) {
            help += " (default " + p.def.dump() + ")";
        }
        std::string names = "--" + p.name;
        std::string dashed = p.name;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        if (dashed != p.name) {
            names = "--" + dashed + "," + names;
        }
        if (p.def.is_boolean()) {
            switches[p.name] = false;
            app.add_flag(names, switches[p.name], help);
        } else {
            text[p.name];
            app.add_option(names, text[p.name], help);
        }
    }
    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    json cfg;
    try {
        cfg = merge_config(cmd, config_path, text, switches, app);
    } catch (const UsageError& e) {
        std::cerr << "hsdf " << cmd.name << ": " << e.what() << "\n\n" << app.help();
        return 1;
    }
    try {
        return cmd.body(cfg);
    } catch (const UsageError& e) {
        std::cerr << "hsdf " << cmd.name << ": " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "hsdf " << cmd.name << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "hsdf " << cmd.name << ": " << e.what() << "\n";
        return 2;
    }
}

int run(int argc, char** argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args);
}

} // namespace hsdf::cli
