#include "planout/cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "planout/dsl.hpp"
#include "planout/error.hpp"
#include "planout/exposure_log.hpp"
#include "planout/interpreter.hpp"
#include "planout/namespace_manager.hpp"
#include "planout/service_api.hpp"
#include "planout/simulator.hpp"

namespace planout {

namespace {

using nlohmann::json;

/// A failure already reported on the error stream.
struct UserError {
  std::string message;
};

std::string read_source(const std::string& path) {
  std::stringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError{"cannot read " + path};
  ss << in.rdbuf();
  return ss.str();
}

std::string position(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

void print_diagnostics(std::ostream& err, const std::string& path, const std::string& text,
                       const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    err << path;
    if (d.offset) err << ":" << position(text, *d.offset) << " (offset " << *d.offset << ")";
    err << ": " << (d.is_error() ? "error" : "warning") << ": " << d.message << '\n';
  }
}

bool looks_like_ir(const std::string& text) {
  auto pos = text.find_first_not_of(" \t\r\n");
  return pos != std::string::npos && text[pos] == '{';
}

/// Loads DSL or serialized IR, reporting diagnostics. Validation errors are
/// fatal; warnings are printed.
ScriptIR load_script(const std::string& path, std::ostream& err) {
  std::string text = read_source(path);
  ScriptIR ir;
  if (looks_like_ir(text)) {
    try {
      ir = deserialize(text);
    } catch (const Error& e) {
      std::vector<Diagnostic> d{{Diagnostic::Severity::Error, e.what(), e.offset()}};
      print_diagnostics(err, path, text, d);
      throw UserError{};
    }
  } else {
    auto parsed = parse(text);
    if (auto* diags = std::get_if<std::vector<Diagnostic>>(&parsed)) {
      print_diagnostics(err, path, text, *diags);
      throw UserError{};
    }
    ir = std::get<ScriptIR>(std::move(parsed));
  }
  auto diags = validate(ir);
  print_diagnostics(err, path, looks_like_ir(text) ? std::string() : text, diags);
  if (has_errors(diags)) throw UserError{};
  return ir;
}

std::pair<std::string, std::string> split_pair(const std::string& raw, char sep, const char* what) {
  auto pos = raw.find(sep);
  if (pos == std::string::npos || pos == 0) {
    throw UserError{std::string("expected ") + what + ", got '" + raw + "'"};
  }
  return {raw.substr(0, pos), raw.substr(pos + 1)};
}

Value::Map typed_pairs(const std::vector<std::string>& raw) {
  Value::Map out;
  for (const auto& r : raw) {
    auto [k, v] = split_pair(r, '=', "name=value");
    out[k] = parse_typed_scalar(v);
  }
  return out;
}

void add_json_pairs(Value::Map& out, const std::vector<std::string>& raw) {
  for (const auto& r : raw) {
    auto [k, v] = split_pair(r, '=', "name=JSON");
    try {
      out[k] = from_json(json::parse(v));
    } catch (const json::exception& e) {
      throw UserError{"value of '" + k + "' is not JSON: " + e.what()};
    }
  }
}

std::string value_text(const Value& v) {
  return v.is_string() ? v.as_string() : canonical_text(v);
}

void print_table(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& rows) {
  std::size_t w = 0;
  for (const auto& [k, _] : rows) w = std::max(w, k.size());
  for (const auto& [k, v] : rows) out << std::left << std::setw(static_cast<int>(w)) << k << "  " << v << '\n';
}

std::string assignment_json(const Assignment& a) {
  return std::string("{\"in_experiment\":") + (a.in_experiment() ? "true" : "false") +
         ",\"params\":" + a.to_text() + "}";
}

struct Globals {
  std::string store;
  std::string log;
  std::string format = "json";
};

std::unique_ptr<NamespaceStore> open_store(const Globals& g) {
  if (g.store.empty()) throw UserError{"no store given; use --store PATH or store=PATH in the config file"};
  return NamespaceStore::open(g.store);
}

std::shared_ptr<LogSink> make_sink(const std::string& where, std::ostream& out) {
  if (where.empty()) return nullptr;
  if (where == "-") return std::make_shared<StreamSink>(out);
  return std::make_shared<FileSink>(where, 64ull << 20);
}

std::atomic<HttpServer*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (HttpServer* s = g_server.load()) s->stop();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PlanOut experiment tool: compile, run and simulate scripts, manage namespaces, serve the API"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file with defaults for global options (store, log, format)");
  Globals g;
  app.add_option("--store", g.store, "namespace store file");
  app.add_option("--log", g.log, "exposure log file ('-' for standard output)");
  app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"json", "table"}));

  // compile / decompile
  std::string file;
  auto* compile = app.add_subcommand("compile", "DSL to canonical IR text");
  compile->add_option("FILE", file, "script ('-' for standard input)")->required();
  auto* decompile_cmd = app.add_subcommand("decompile", "IR text to DSL");
  decompile_cmd->add_option("FILE", file, "serialized IR")->required();

  // run
  std::vector<std::string> inputs, json_inputs, overrides_raw;
  std::string ns_name = "default", exp_name = "default", sweep;
  auto* run = app.add_subcommand("run", "evaluate a script for one unit");
  run->add_option("FILE", file, "DSL or IR file")->required();
  run->add_option("--input,-i", inputs, "input name=value");
  run->add_option("--input-json", json_inputs, "input name=JSON (for lists)");
  run->add_option("--override,-o", overrides_raw, "frozen parameter name=value");
  run->add_option("--ns", ns_name, "namespace salt");
  run->add_option("--exp", exp_name, "experiment salt");
  run->add_option("--sweep", sweep, "name:N evaluates for name = 0..N-1, one line each");

  // simulate
  std::int64_t n = 10000;
  std::string unit;
  std::vector<std::string> grid, pairs;
  int jobs = 1;
  bool hashed = false;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo distribution of a script's parameters");
  sim->add_option("FILE", file, "DSL or IR file")->required();
  sim->add_option("--n", n, "number of units")->check(CLI::PositiveNumber);
  sim->add_option("--unit", unit, "input to sweep (default: first unit the script uses)");
  sim->add_option("--grid", grid, "name:N axis; repeat for a grid (replaces --n/--unit)");
  sim->add_option("--pairs", pairs, "a,b parameter pair to cross-tabulate");
  sim->add_option("--input,-i", inputs, "fixed input name=value");
  sim->add_option("--input-json", json_inputs, "fixed input name=JSON");
  sim->add_option("--override,-o", overrides_raw, "frozen parameter name=value");
  sim->add_option("--ns", ns_name, "namespace salt");
  sim->add_option("--exp", exp_name, "experiment salt");
  sim->add_option("--jobs,-j", jobs, "worker threads")->check(CLI::Range(1, 256));
  sim->add_flag("--hashed-ids", hashed, "sweep pseudo-random id strings instead of integers");

  // ns
  auto* ns = app.add_subcommand("ns", "namespace administration");
  ns->require_subcommand(1);
  std::string ns_arg, exp_arg, primary;
  int segments = 10000;
  std::vector<std::string> defaults_raw;
  std::string unit_value, override_string;
  auto* ns_create = ns->add_subcommand("create", "create a namespace");
  ns_create->add_option("NAME", ns_arg)->required();
  ns_create->add_option("--unit", primary, "primary unit name")->required();
  ns_create->add_option("--segments", segments, "number of segments")->check(CLI::PositiveNumber);
  ns_create->add_option("--default", defaults_raw, "launch value name=value");
  auto* ns_alloc = ns->add_subcommand("alloc", "allocate segments to a new experiment");
  ns_alloc->add_option("NAMESPACE", ns_arg)->required();
  ns_alloc->add_option("EXPERIMENT", exp_arg)->required();
  ns_alloc->add_option("FILE", file, "DSL or IR file")->required();
  ns_alloc->add_option("--segments", segments, "segments to allocate")->required();
  auto* ns_dealloc = ns->add_subcommand("dealloc", "return an experiment's segments to the pool");
  ns_dealloc->add_option("NAMESPACE", ns_arg)->required();
  ns_dealloc->add_option("EXPERIMENT", exp_arg)->required();
  auto* ns_defaults = ns->add_subcommand("defaults", "show or set launch values");
  ns_defaults->add_option("NAMESPACE", ns_arg)->required();
  ns_defaults->add_option("VALUES", defaults_raw, "name=value to set");
  auto* ns_map = ns->add_subcommand("map", "segment allocation of a namespace");
  ns_map->add_option("NAMESPACE", ns_arg)->required();
  bool full_map = false;
  ns_map->add_flag("--full", full_map, "print the owner of every segment");
  auto* ns_list = ns->add_subcommand("list", "list namespaces");
  auto* ns_assign = ns->add_subcommand("assign", "assignment for one unit");
  ns_assign->add_option("NAMESPACE", ns_arg)->required();
  ns_assign->add_option("UNIT", unit_value, "primary unit value")->required();
  ns_assign->add_option("--input,-i", inputs, "extra input name=value");
  ns_assign->add_option("--input-json", json_inputs, "extra input name=JSON");
  ns_assign->add_option("--freeze", override_string, "overrides as param:value,param2:value2");

  // serve
  std::string host = "127.0.0.1", cors = "*";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "serve the HTTP API");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value");
  serve->add_option("--jobs,-j", jobs, "threads for simulate requests")->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "planout: " << e.what() << '\n';
    return 1;
  }

  const bool table = g.format == "table";
  try {
    if (*compile) {
      out << serialize(load_script(file, err)) << '\n';
    } else if (*decompile_cmd) {
      out << decompile(load_script(file, err));
    } else if (*run) {
      ScriptIR ir = load_script(file, err);
      Inputs in = typed_pairs(inputs);
      add_json_pairs(in, json_inputs);
      Overrides ov = typed_pairs(overrides_raw);
      SaltContext ctx(ns_name, exp_name);
      auto emit = [&](const Assignment& a) {
        if (table) {
          std::vector<std::pair<std::string, std::string>> rows;
          for (const auto& [k, v] : a.params()) rows.emplace_back(k, value_text(v));
          if (!a.in_experiment()) rows.emplace_back("(in experiment)", "no");
          print_table(out, rows);
        } else {
          out << assignment_json(a) << '\n';
        }
      };
      if (sweep.empty()) {
        emit(evaluate(ir, in, ov, ctx));
      } else {
        auto [name, count_text] = split_pair(sweep, ':', "name:N");
        Value count = parse_typed_scalar(count_text);
        if (!count.is_int() || count.as_int() < 1) throw UserError{"--sweep needs a positive count"};
        for (std::int64_t i = 0; i < count.as_int(); ++i) {
          in[name] = i;
          if (table) out << name << " = " << i << '\n';
          emit(evaluate(ir, in, ov, ctx));
        }
      }
    } else if (*sim) {
      ScriptIR ir = load_script(file, err);
      SimulationOptions opts;
      opts.fixed_inputs = typed_pairs(inputs);
      add_json_pairs(opts.fixed_inputs, json_inputs);
      opts.overrides = typed_pairs(overrides_raw);
      opts.context = SaltContext(ns_name, exp_name);
      opts.jobs = jobs;
      opts.hashed_ids = hashed;
      if (!grid.empty()) {
        for (const auto& axis : grid) {
          auto [name, count_text] = split_pair(axis, ':', "name:N");
          Value count = parse_typed_scalar(count_text);
          if (!count.is_int() || count.as_int() < 1) throw UserError{"grid axis '" + name + "' needs a positive count"};
          opts.axes.push_back({name, count.as_int()});
        }
      } else {
        if (unit.empty()) {
          for (const auto& [_, us] : list_units(ir)) {
            if (!us.empty() && us.front() != kDynamicUnit) {
              unit = us.front();
              break;
            }
          }
        }
        if (unit.empty()) throw UserError{"cannot tell which input to sweep; pass --unit"};
        opts.axes.push_back({unit, n});
      }
      for (const auto& p : pairs) {
        auto [a, b] = split_pair(p, ',', "a,b");
        opts.pairs.emplace_back(a, b);
      }
      auto report = simulate(ir, opts);
      out << (table ? report_table(report) : report_json(report) + "\n");
    } else if (*ns) {
      auto store = open_store(g);
      if (*ns_create) {
        auto v = store->create_namespace(ns_arg, primary, segments, typed_pairs(defaults_raw));
        out << json{{"namespace", ns_arg}, {"version", v}}.dump() << '\n';
      } else if (*ns_alloc) {
        ScriptIR ir = load_script(file, err);
        auto r = store->allocate_experiment(ns_arg, exp_arg, ir, segments);
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        out << json{{"experiment", exp_arg}, {"segments", r.experiment.segments.size()}, {"version", r.version}}.dump()
            << '\n';
      } else if (*ns_dealloc) {
        std::uint64_t v = 0;
        auto prior = store->deallocate_experiment(ns_arg, exp_arg, &v);
        out << json{{"experiment", exp_arg}, {"prior_status", std::string(status_name(prior))}, {"version", v}}.dump()
            << '\n';
      } else if (*ns_defaults) {
        for (const auto& [k, v] : typed_pairs(defaults_raw)) store->set_launch_value(ns_arg, k, v);
        const auto& d = store->snapshot()->at(ns_arg).launch_defaults;
        if (table) {
          std::vector<std::pair<std::string, std::string>> rows;
          for (const auto& [k, v] : d) rows.emplace_back(k, value_text(v));
          print_table(out, rows);
        } else {
          out << canonical_text(d) << '\n';
        }
      } else if (*ns_map) {
        auto snap = store->snapshot();
        const Namespace& nsv = snap->at(ns_arg);
        std::map<std::string, int> counts;
        for (const auto& owner : nsv.segment_map) ++counts[owner.empty() ? "<unallocated>" : owner];
        if (full_map) {
          json segs = json::array();
          for (const auto& owner : nsv.segment_map) segs.push_back(owner.empty() ? json(nullptr) : json(owner));
          out << json{{"namespace", ns_arg}, {"segments", segs}}.dump() << '\n';
        } else if (table) {
          std::vector<std::pair<std::string, std::string>> rows;
          for (const auto& [k, c] : counts) rows.emplace_back(k, std::to_string(c));
          print_table(out, rows);
        } else {
          out << json{{"namespace", ns_arg}, {"num_segments", nsv.num_segments}, {"allocation", counts}}.dump() << '\n';
        }
      } else if (*ns_list) {
        auto snap = store->snapshot();
        json list = json::array();
        for (const auto& [name, nsv] : snap->namespaces) {
          json exps = json::object();
          for (const auto& [en, e] : nsv->experiments) exps[en] = std::string(status_name(e.status));
          list.push_back({{"name", name},
                          {"primary_unit", nsv->primary_unit},
                          {"num_segments", nsv->num_segments},
                          {"free_segments", nsv->free_segments()},
                          {"experiments", exps}});
        }
        out << json{{"version", snap->version}, {"namespaces", list}}.dump() << '\n';
      } else if (*ns_assign) {
        std::shared_ptr<ExposureLogger> logger;
        if (auto sink = make_sink(g.log, out)) {
          logger = std::make_shared<ExposureLogger>(sink);
          store->set_logger(logger);
        }
        Inputs in = typed_pairs(inputs);
        add_json_pairs(in, json_inputs);
        auto a = store->assign(ns_arg, parse_typed_scalar(unit_value), in, parse_override_string(override_string));
        auto params = a.params();
        for (const auto& [k, _] : params) a.get(k);
        if (logger) logger->flush();
        if (table) {
          std::vector<std::pair<std::string, std::string>> rows{
              {"(experiment)", a.experiment().value_or("-")}, {"(segment)", std::to_string(a.segment())}};
          for (const auto& [k, v] : params) rows.emplace_back(k, value_text(v));
          print_table(out, rows);
        } else {
          out << json{{"experiment", a.experiment() ? json(*a.experiment()) : json(nullptr)},
                      {"segment", a.segment()},
                      {"params", to_json(Value(params))}}
                     .dump()
              << '\n';
        }
      }
    } else if (*serve) {
      std::shared_ptr<NamespaceStore> store = open_store(g);
      std::shared_ptr<ExposureLogger> logger;
      if (auto sink = make_sink(g.log, out)) logger = std::make_shared<ExposureLogger>(sink);
      ApiOptions opts;
      opts.cors_origin = cors;
      opts.simulation_jobs = jobs;
      auto service = std::make_shared<ApiService>(store, logger, opts);
      HttpServer server(service);
      int bound = server.bind(host, port);
      err << "planout: serving on http://" << host << ":" << bound << '\n';
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      server.listen();
      g_server = nullptr;
      if (logger) logger->flush();
    }
  } catch (const UserError& e) {
    if (!e.message.empty()) err << "planout: " << e.message << '\n';
    return 1;
  } catch (const Error& e) {
    err << "planout: " << error_code_name(e.code()) << ": " << e.what();
    if (e.offset()) err << " (offset " << *e.offset() << ")";
    err << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "planout: internal error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace planout
