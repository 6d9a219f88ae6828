#ifndef PPREG_CONFIG_HPP
#define PPREG_CONFIG_HPP

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ppreg {

// TOML subset: [tables], [[arrays of tables]], dotted keys, basic and
// literal strings, integers, floats (incl. inf/nan), booleans, arrays
// (multi-line allowed) and inline tables. Throws ParameterError with the
// line number on malformed input.
nlohmann::json parse_toml(std::string_view text);

// `.json` files are parsed as JSON, anything else as TOML.
nlohmann::json load_config_file(const std::filesystem::path& path);

// Defaults for simulate, fit, path, se, study, surface.
nlohmann::json config_defaults(const std::string& command);

// Overlays user values on the defaults. Unknown keys and type mismatches
// throw ParameterError naming the dotted key.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& user);

// Sets a dotted key (e.g. "penalty.kind") on a config object; the value
// text is read as JSON when it parses, else as a string.
void set_dotted(nlohmann::json& config, const std::string& key, const std::string& value_text);

}  // namespace ppreg

#endif  // PPREG_CONFIG_HPP
