// ppreg command-line front end. Talks to the library only through ppreg.h.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppreg/ppreg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  int status;
  std::string message;
};

const char* status_name(int s) {
  switch (s) {
    case PPREG_ERR_USAGE: return "usage";
    case PPREG_ERR_DATA: return "data";
    case PPREG_ERR_NUMERICAL: return "numerical";
    case PPREG_ERR_DOMAIN: return "domain";
    case PPREG_ERR_UNSUPPORTED: return "unsupported";
    default: return "internal";
  }
}

int exit_code(int s) {
  switch (s) {
    case PPREG_ERR_USAGE:
    case PPREG_ERR_DOMAIN:
    case PPREG_ERR_UNSUPPORTED: return 1;
    case PPREG_ERR_DATA: return 2;
    default: return 3;
  }
}

int report(const Failure& f) {
  json err = {{"error", {{"kind", status_name(f.status)}, {"code", exit_code(f.status)}, {"message", f.message}}}};
  std::cerr << err.dump() << "\n";
  return exit_code(f.status);
}

void check(ppreg_status s) {
  if (s != PPREG_OK) throw Failure{s, ppreg_last_error()};
}

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  std::string out(s ? s : "");
  ppreg_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
};
using Covariates = Handle<ppreg_covariates, ppreg_covariates_free>;
using Pattern = Handle<ppreg_pattern, ppreg_pattern_free>;
using Fit = Handle<ppreg_fit, ppreg_fit_free>;

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure{PPREG_ERR_DATA, "cannot open '" + path.string() + "'"};
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Failure{PPREG_ERR_DATA, "cannot write '" + path.string() + "'"};
  out << text;
  if (!out) throw Failure{PPREG_ERR_DATA, "write failed for '" + path.string() + "'"};
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Failure{PPREG_ERR_DATA, path.string() + ": " + e.what()};
  }
}

// Keys holding file system paths, per command.
std::vector<std::vector<std::string>> path_keys(const std::string& command) {
  if (command == "study") return {{"scenario", "grid_dir"}};
  if (command == "simulate" || command == "surface") return {{"data", "covariates"}};
  return {{"data", "points"}, {"data", "covariates"}};
}

void absolutize(json& config, const std::string& command, const fs::path& base) {
  for (const auto& key : path_keys(command)) {
    json* node = &config;
    bool found = true;
    for (const auto& part : key) {
      if (!node->is_object() || !node->contains(part)) {
        found = false;
        break;
      }
      node = &(*node)[part];
    }
    if (!found || !node->is_string()) continue;
    const std::string v = node->get<std::string>();
    if (v.empty()) continue;
    const fs::path p(v);
    if (p.is_relative()) *node = fs::absolute(base / p).lexically_normal().string();
  }
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--config", c.config_path, "TOML (or .json) config file");
  app->add_option("--set", c.sets, "Override a config value, key=value (repeatable)");
  auto* o = app->add_option("--out", c.out, "Output file");
  if (out_required) o->required();
}

json set_value(const json& config, const std::string& key, const std::string& value) {
  char* out = nullptr;
  check(ppreg_config_set(config.dump().c_str(), key.c_str(), value.c_str(), &out));
  return json::parse(take(out));
}

json set_string(const json& config, const std::string& key, const std::string& value) {
  return set_value(config, key, json(value).dump());
}

// Config file, then flag overrides, then --set, then defaults and checks.
json build_config(const std::string& command, const Common& c, json user,
                  const std::vector<std::pair<std::string, std::string>>& flags) {
  if (!c.config_path.empty()) {
    const fs::path path(c.config_path);
    json file;
    if (path.extension() == ".json") {
      file = parse_json_file(path);
    } else {
      char* out = nullptr;
      const ppreg_status s = ppreg_config_parse_toml(read_file(path).c_str(), &out);
      if (s != PPREG_OK) throw Failure{s, "config file '" + path.string() + "': " + ppreg_last_error()};
      file = json::parse(take(out));
    }
    if (!file.is_object()) throw Failure{PPREG_ERR_USAGE, "config file must hold a table"};
    absolutize(file, command, fs::absolute(path).parent_path());
    user.merge_patch(file);
  }
  for (const auto& [key, value] : flags) user = set_string(user, key, value);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Failure{PPREG_ERR_USAGE, "--set expects key=value, got '" + s + "'"};
    }
    user = set_value(user, s.substr(0, eq), s.substr(eq + 1));
  }
  absolutize(user, command, fs::current_path());
  char* out = nullptr;
  check(ppreg_config_resolve(command.c_str(), user.dump().c_str(), &out));
  return json::parse(take(out));
}

std::string required_path(const json& config, const char* section, const char* key) {
  const std::string v = config.at(section).at(key).get<std::string>();
  if (v.empty()) {
    throw Failure{PPREG_ERR_USAGE, std::string("no ") + section + "." + key + " given (flag or config)"};
  }
  return v;
}

void load_covariates(const json& data, Covariates& covs) {
  const std::string dir = required_path(json{{"data", data}}, "data", "covariates");
  const std::string missing = data.value("missing", "reject");
  if (missing != "reject" && missing != "mean_impute") {
    throw Failure{PPREG_ERR_USAGE, "data.missing must be 'reject' or 'mean_impute'"};
  }
  check(ppreg_covariates_load_dir(dir.c_str(), missing == "mean_impute" ? 1 : 0, covs.out()));
}

void load_points(const json& config, const Covariates& covs, Pattern& pattern) {
  const std::string path = required_path(config, "data", "points");
  double window[4];
  check(ppreg_covariates_window(covs.p, window));
  check(ppreg_pattern_read_csv(path.c_str(), window, pattern.out()));
}

void write_sidecar(const std::string& out, const json& doc) { write_file(out + ".config.json", doc.dump(2) + "\n"); }

void load_fit(const std::string& path, Fit& fit, json* doc) {
  const std::string text = read_file(path);
  const ppreg_status s = ppreg_fit_from_json(text.c_str(), fit.out());
  if (s != PPREG_OK) throw Failure{PPREG_ERR_DATA, path + ": " + ppreg_last_error()};
  if (doc) *doc = json::parse(text);
}

using Flags = std::vector<std::pair<std::string, std::string>>;

void add_flag(Flags& flags, const std::string& key, const std::string& value) {
  if (!value.empty()) flags.emplace_back(key, value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ppreg: penalized log-linear intensity estimation for spatial point patterns"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ppreg_version()));

  Common c;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string points, covariates, penalty, lambda, likelihood, weights, fit_path, path_path;
  bool full_scale = false;

  auto* sim = app.add_subcommand("simulate", "Simulate a point pattern from a log-linear intensity");
  add_common(sim, c);
  sim->add_option("--seed", seed, "Random seed")->required();
  sim->add_option("--covariates", covariates, "Covariate grid directory");

  auto add_model_flags = [&](CLI::App* a) {
    a->add_option("--points", points, "Point pattern CSV (header x,y)");
    a->add_option("--covariates", covariates, "Covariate grid directory");
    a->add_option("--penalty", penalty, "ridge|lasso|enet|adaptive_lasso|adaptive_enet|scad|mcplus");
    a->add_option("--lambda", lambda, "Tuning parameter or 'auto'");
    a->add_option("--likelihood", likelihood, "poisson|logistic");
    a->add_option("--weights", weights, "none|wpl");
  };
  auto* fit = app.add_subcommand("fit", "Fit a penalized intensity model");
  add_common(fit, c);
  add_model_flags(fit);
  auto* path = app.add_subcommand("path", "Compute a regularization path");
  add_common(path, c);
  add_model_flags(path);

  auto* select = app.add_subcommand("select", "Pick lambda on a path by WQBIC");
  add_common(select, c);
  select->add_option("--path", path_path, "Path JSON from 'ppreg path'")->required();

  auto* se = app.add_subcommand("se", "Standard errors of a fit");
  add_common(se, c);
  se->add_option("--fit", fit_path, "Fit JSON from 'ppreg fit'")->required();
  se->add_option("--covariates", covariates, "Covariate grid directory (default: from the fit)");

  auto* surface = app.add_subcommand("surface", "Write the fitted intensity as an ASCII grid");
  add_common(surface, c);
  surface->add_option("--fit", fit_path, "Fit JSON from 'ppreg fit'")->required();
  surface->add_option("--covariates", covariates, "Covariate grid directory (default: from the fit)");

  auto* study = app.add_subcommand("study", "Run a simulation study");
  add_common(study, c);
  study->add_option("--seed", seed, "Master seed")->required();
  study->add_option("--threads", threads, "Worker threads (1 = serial)")->check(CLI::PositiveNumber);
  study->add_flag("--full-scale", full_scale, "2000 replicates on a 201x101 grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(Failure{PPREG_ERR_USAGE, e.what()});
  }

  try {
    if (sim->parsed()) {
      Flags flags;
      add_flag(flags, "data.covariates", covariates);
      const json config = build_config("simulate", c, json::object(), flags);
      Covariates covs;
      load_covariates(config.at("data"), covs);
      Pattern pattern;
      check(ppreg_simulate(covs.p, config.dump().c_str(), *seed, pattern.out()));
      check(ppreg_pattern_write_csv(pattern.p, c.out.c_str()));
      write_sidecar(c.out, {{"command", "simulate"}, {"seed", *seed}, {"config", config}});
      return 0;
    }

    if (fit->parsed() || path->parsed()) {
      const std::string command = fit->parsed() ? "fit" : "path";
      Flags flags;
      add_flag(flags, "data.points", points);
      add_flag(flags, "data.covariates", covariates);
      add_flag(flags, "penalty.kind", penalty);
      add_flag(flags, "model.likelihood", likelihood);
      add_flag(flags, "model.weights", weights);
      json config = build_config(command, c, json::object(), flags);
      if (!lambda.empty()) {
        config = set_value(config, "penalty.lambda", lambda == "auto" ? "\"auto\"" : lambda);
        char* out = nullptr;
        check(ppreg_config_resolve(command.c_str(), config.dump().c_str(), &out));
        config = json::parse(take(out));
      }
      Covariates covs;
      load_covariates(config.at("data"), covs);
      Pattern pattern;
      load_points(config, covs, pattern);
      if (command == "fit") {
        Fit f;
        check(ppreg_fit_run(pattern.p, covs.p, config.dump().c_str(), f.out()));
        char* out = nullptr;
        check(ppreg_fit_to_json(f.p, &out));
        write_file(c.out, take(out) + "\n");
        int converged = 0;
        check(ppreg_fit_converged(f.p, &converged));
        if (!converged) throw Failure{PPREG_ERR_NUMERICAL, "fit did not converge (written to " + c.out + ")"};
      } else {
        char* out = nullptr;
        check(ppreg_path_run(pattern.p, covs.p, config.dump().c_str(), &out));
        const std::string text = take(out);
        write_file(c.out, text + "\n");
        const json doc = json::parse(text);
        bool any = false;
        for (const auto& e : doc.at("entries")) any = any || e.at("converged").get<bool>();
        if (!any) throw Failure{PPREG_ERR_NUMERICAL, "no lambda on the path converged"};
      }
      return 0;
    }

    if (select->parsed()) {
      if (!c.config_path.empty() || !c.sets.empty()) {
        throw Failure{PPREG_ERR_USAGE, "select takes no config; it reads everything from --path"};
      }
      const fs::path p = fs::absolute(path_path);
      const std::string text = read_file(p);
      char* out = nullptr;
      check(ppreg_select(text.c_str(), &out));
      json doc = json::parse(take(out));
      doc["config"] = {{"path", p.string()}};
      write_file(c.out, doc.dump(2) + "\n");
      return 0;
    }

    if (se->parsed() || surface->parsed()) {
      Fit f;
      json fit_doc;
      load_fit(fit_path, f, &fit_doc);
      const json& fc = fit_doc.contains("config") ? fit_doc["config"] : json::object();
      Flags flags;
      add_flag(flags, "data.covariates", covariates);
      if (se->parsed()) {
        json base = json::object();
        if (fc.contains("data")) base["data"] = fc["data"];
        if (fc.contains("model")) base["model"] = fc["model"];
        const json config = build_config("se", c, base, flags);
        Covariates covs;
        load_covariates(config.at("data"), covs);
        char* out = nullptr;
        check(ppreg_standard_errors(f.p, covs.p, config.dump().c_str(), &out));
        write_file(c.out, take(out) + "\n");
      } else {
        json base = json::object();
        if (fc.contains("data")) base["data"] = fc["data"];
        const json config = build_config("surface", c, base, flags);
        Covariates covs;
        load_covariates(config.at("data"), covs);
        check(ppreg_surface_write(f.p, covs.p, c.out.c_str()));
        write_sidecar(c.out, {{"command", "surface"}, {"fit", fs::absolute(fit_path).string()}, {"config", config}});
      }
      return 0;
    }

    if (study->parsed()) {
      json user = json::object();
      if (full_scale) {
        user["scenario"] = {{"replicates", 2000}, {"grid_cols", 201}, {"grid_rows", 101}};
      }
      const json config = build_config("study", c, user, {});
      char* csv = nullptr;
      char* summary = nullptr;
      check(ppreg_study_run(config.dump().c_str(), *seed, threads, &csv, &summary));
      const std::string csv_text = take(csv);
      const json summary_doc = json::parse(take(summary));
      write_file(c.out, csv_text);
      write_sidecar(c.out, {{"command", "study"},
                            {"seed", *seed},
                            {"threads", threads},
                            {"config", config},
                            {"summary", summary_doc}});
      return 0;
    }
  } catch (const Failure& f) {
    return report(f);
  } catch (const json::exception& e) {
    return report(Failure{PPREG_ERR_DATA, e.what()});
  } catch (const std::exception& e) {
    return report(Failure{PPREG_ERR_INTERNAL, e.what()});
  }
  return report(Failure{PPREG_ERR_USAGE, "no command given"});
}
