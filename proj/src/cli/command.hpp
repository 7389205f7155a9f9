#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace hsdf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

/// A flag of a subcommand. The default's JSON type decides how the flag text is
/// parsed; booleans become switches. A null default with `required` must be
/// supplied by the flag or the config file.
struct Param {
    std::string name;
    json def;
    std::string help;
    bool required = false;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<Param> params;
    // Receives the merged configuration; returns the exit code.
    std::function<int(const json& cfg)> body;
};

/// Thrown for bad user input detected before any work starts (exit code 1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<Command> data_commands();
std::vector<Command> model_commands();

/// Writes `<dir>/run.json`: command, merged configuration, seed and versions.
void write_run_record(const fs::path& dir, const std::string& command, const json& cfg);

/// Parameters common to every command.
Param out_param(const std::string& help);
Param seed_param();

} // namespace hsdf::cli
