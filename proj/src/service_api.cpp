#include "planout/service_api.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "planout/dsl.hpp"
#include "planout/error.hpp"
#include "planout/simulator.hpp"

namespace planout {

using nlohmann::json;

// --- Override strings ---------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void malformed_override(const std::string& why) {
  throw Error(ErrorCode::MalformedOverride, "malformed override: " + why);
}

}  // namespace

Overrides parse_override_string(std::string_view raw) {
  Overrides out;
  if (trim(raw).empty()) return out;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t comma = raw.find(',', start);
    std::string_view pair = raw.substr(start, comma == std::string_view::npos ? raw.npos : comma - start);
    std::size_t colon = pair.find(':');
    if (colon == std::string_view::npos) malformed_override("'" + std::string(pair) + "' has no ':'");
    std::string_view key = trim(pair.substr(0, colon));
    std::string_view value = trim(pair.substr(colon + 1));
    if (key.empty()) malformed_override("empty parameter name in '" + std::string(pair) + "'");
    if (value.empty()) malformed_override("no value for '" + std::string(key) + "'");
    out[std::string(key)] = parse_typed_scalar(value);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_override_string(const Overrides& overrides) {
  std::string out;
  for (const auto& [key, value] : overrides) {
    if (key.empty() || key.find_first_of(",:") != std::string::npos || trim(key) != key) {
      malformed_override("parameter name '" + key + "' cannot be written");
    }
    std::string text;
    switch (value.kind()) {
      case Value::Kind::Bool: text = value.as_bool() ? "1" : "0"; break;
      case Value::Kind::Int: text = std::to_string(value.as_int()); break;
      case Value::Kind::Float: {
        double d = value.as_float();
        if (!std::isfinite(d)) malformed_override("non-finite value for '" + key + "'");
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, d);
        text.assign(buf, res.ptr);
        if (text.find_first_of(".e") == std::string::npos) text += ".0";
        break;
      }
      case Value::Kind::String: {
        text = value.as_string();
        if (text.empty() || text.find(',') != std::string::npos || trim(text) != text ||
            !parse_typed_scalar(text).is_string()) {
          malformed_override("string value for '" + key + "' cannot be written unambiguously");
        }
        break;
      }
      default: malformed_override("value for '" + key + "' is not a scalar");
    }
    if (!out.empty()) out += ',';
    out += key + ":" + text;
  }
  return out;
}

// --- Service ------------------------------------------------------------------------

namespace {

struct HttpError {
  int status;
  std::string message;
  std::string code;
  json extra = nullptr;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownNamespace:
    case ErrorCode::UnknownExperiment: return 404;
    case ErrorCode::VersionConflict:
    case ErrorCode::DuplicateNamespace:
    case ErrorCode::DuplicateExperiment: return 409;
    case ErrorCode::InvalidScript:
    case ErrorCode::InsufficientSegments:
    case ErrorCode::UnknownParameter: return 422;
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidSalt:
    case ErrorCode::MalformedOverride: return 400;
    default: return 500;
  }
}

json diagnostics_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) {
    out.push_back({{"severity", d.is_error() ? "error" : "warning"},
                   {"message", d.message},
                   {"offset", d.offset ? json(*d.offset) : json(nullptr)}});
  }
  return out;
}

json parse_body(const ApiRequest& req) {
  if (trim(req.body).empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "request body must be a JSON object", "InvalidArgument"};
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError{400, std::string("request body is not JSON: ") + e.what(), "ParseError"};
  }
}

template <typename T>
T required(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) throw HttpError{400, std::string("missing field '") + key + "'", "InvalidArgument"};
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw HttpError{400, std::string("field '") + key + "' has the wrong type", "InvalidArgument"};
  }
}

template <typename T>
T optional_field(const json& body, const char* key, T fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  return required<T>(body, key);
}

std::uint64_t expected_version(const json& body) {
  if (!body.contains("expected_version")) {
    throw HttpError{400, "mutations need 'expected_version' (the store version the client last read)",
                    "InvalidArgument"};
  }
  return required<std::uint64_t>(body, "expected_version");
}

Value::Map map_field(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return {};
  if (!body[key].is_object()) throw HttpError{400, std::string("field '") + key + "' must be an object", "InvalidArgument"};
  return from_json(body[key]).as_map();
}

/// Script from {"script": DSL text} or {"ir": IR object}; bad scripts are 422.
ScriptIR script_from(const json& body) {
  if (body.contains("ir")) {
    try {
      return ir_from_json(body["ir"]);
    } catch (const Error& e) {
      throw HttpError{422, e.what(), std::string(error_code_name(e.code())),
                      json{{"diagnostics", json::array({{{"severity", "error"}, {"message", e.what()}, {"offset", nullptr}}})}}};
    }
  }
  auto text = required<std::string>(body, "script");
  auto parsed = parse(text);
  if (auto* diags = std::get_if<std::vector<Diagnostic>>(&parsed)) {
    throw HttpError{422, "script does not parse", "ParseError", json{{"diagnostics", diagnostics_json(*diags)}}};
  }
  return std::get<ScriptIR>(std::move(parsed));
}

json experiment_json(const ExperimentDef& e) {
  return {{"name", e.name},
          {"status", std::string(status_name(e.status))},
          {"segments", e.segments.size()},
          {"created_at", e.created_at_ms},
          {"parameters", e.parameters},
          {"digest", e.digest},
          {"script", decompile(e.ir)}};
}

json namespace_summary(const Namespace& ns) {
  json active = json::array();
  for (const auto& [name, e] : ns.experiments) {
    if (e.status == ExperimentStatus::Active) active.push_back(name);
  }
  return {{"name", ns.name},
          {"primary_unit", ns.primary_unit},
          {"num_segments", ns.num_segments},
          {"free_segments", ns.free_segments()},
          {"active_experiments", std::move(active)}};
}

json namespace_detail(const Namespace& ns) {
  json out = namespace_summary(ns);
  out["launch_defaults"] = to_json(Value(ns.launch_defaults));
  json experiments = json::array();
  for (const auto& [_, e] : ns.experiments) experiments.push_back(experiment_json(e));
  out["experiments"] = std::move(experiments);
  json allocation = json::object();
  for (const auto& owner : ns.segment_map) {
    std::string key = owner.empty() ? "" : owner;
    allocation[key] = allocation.value(key, 0) + 1;
  }
  out["allocation"] = json::object();
  for (auto& [k, v] : allocation.items()) out["allocation"][k.empty() ? "<unallocated>" : k] = v;
  return out;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) parts.push_back(httplib::detail::decode_url(path.substr(i, j - i), false));
    i = j;
  }
  return parts;
}

ApiResponse ok(int status, const json& body) { return {status, body.dump(), {}}; }

}  // namespace

ApiService::ApiService(std::shared_ptr<NamespaceStore> store, std::shared_ptr<ExposureLogger> logger,
                       ApiOptions options)
    : store_(std::move(store)), logger_(std::move(logger)), options_(std::move(options)) {
  if (!store_) throw Error(ErrorCode::InvalidArgument, "service needs a store");
  if (logger_) store_->set_logger(logger_);
}

ApiResponse ApiService::handle(const ApiRequest& request) const {
  ApiResponse resp;
  try {
    resp = route(request);
  } catch (const HttpError& e) {
    json body = {{"error", e.message}, {"code", e.code}};
    if (e.extra.is_object()) body.update(e.extra);
    resp = ok(e.status, body);
  } catch (const Error& e) {
    json body = {{"error", e.what()}, {"code", std::string(error_code_name(e.code()))}};
    if (e.offset()) body["offset"] = *e.offset();
    resp = ok(status_for(e.code()), body);
  } catch (const std::exception& e) {
    resp = ok(500, json{{"error", e.what()}, {"code", "Internal"}});
  }
  resp.headers["Content-Type"] = "application/json";
  resp.headers["Access-Control-Allow-Origin"] = options_.cors_origin;
  resp.headers["Access-Control-Allow-Methods"] = "GET, POST, PUT, OPTIONS";
  resp.headers["Access-Control-Allow-Headers"] = "Content-Type";
  return resp;
}

ApiResponse ApiService::route(const ApiRequest& req) const {
  const auto parts = split_path(req.path);
  const std::string& m = req.method;
  auto is = [&](std::initializer_list<const char*> shape) {
    if (parts.size() != shape.size()) return false;
    std::size_t i = 0;
    for (const char* s : shape) {
      if (std::string_view(s) != "*" && parts[i] != s) return false;
      ++i;
    }
    return true;
  };
  auto method_not_allowed = [&]() -> ApiResponse {
    throw HttpError{405, "method " + m + " not allowed on " + req.path, "MethodNotAllowed"};
  };

  if (m == "OPTIONS") return {204, "", {}};

  if (is({"health"})) {
    if (m != "GET") return method_not_allowed();
    return ok(200, {{"status", "ok"}, {"version", store_->version()}});
  }

  if (is({"compile"})) {
    if (m != "POST") return method_not_allowed();
    json body = parse_body(req);
    auto text = required<std::string>(body, "script");
    auto parsed = parse(text);
    if (auto* diags = std::get_if<std::vector<Diagnostic>>(&parsed)) {
      return ok(200, {{"ok", false}, {"ir", nullptr}, {"diagnostics", diagnostics_json(*diags)}});
    }
    const auto& ir = std::get<ScriptIR>(parsed);
    auto diags = validate(ir);
    json units = json::object();
    for (const auto& [p, us] : list_units(ir)) units[p] = us;
    return ok(200, {{"ok", !has_errors(diags)},
                    {"ir", to_json(ir)},
                    {"diagnostics", diagnostics_json(diags)},
                    {"parameters", list_parameters(ir)},
                    {"units", std::move(units)},
                    {"digest", script_digest(ir)}});
  }

  if (is({"simulate"})) {
    if (m != "POST") return method_not_allowed();
    json body = parse_body(req);
    ScriptIR ir = script_from(body);
    auto diags = validate(ir);
    if (has_errors(diags)) {
      throw HttpError{422, "script does not validate", "InvalidScript", json{{"diagnostics", diagnostics_json(diags)}}};
    }
    auto n = optional_field<std::uint64_t>(body, "n", 10000);
    if (n < 1 || n > options_.max_simulation_units) {
      throw HttpError{400, "n must be between 1 and " + std::to_string(options_.max_simulation_units), "InvalidArgument"};
    }
    std::string unit = optional_field<std::string>(body, "unit", "");
    if (unit.empty()) {
      for (const auto& [_, us] : list_units(ir)) {
        if (!us.empty() && us.front() != kDynamicUnit) {
          unit = us.front();
          break;
        }
      }
    }
    if (unit.empty()) unit = "userid";
    SimulationOptions opts;
    opts.axes = {{unit, static_cast<std::int64_t>(n)}};
    opts.fixed_inputs = map_field(body, "inputs");
    opts.overrides = map_field(body, "overrides");
    opts.hashed_ids = optional_field<bool>(body, "hashed_ids", false);
    opts.jobs = options_.simulation_jobs;
    for (const auto& p : optional_field<json>(body, "pairs", json::array())) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
        throw HttpError{400, "pairs must be [[a, b], ...]", "InvalidArgument"};
      }
      opts.pairs.emplace_back(p[0].get<std::string>(), p[1].get<std::string>());
    }
    opts.context = SaltContext(optional_field<std::string>(body, "namespace", "default"),
                               optional_field<std::string>(body, "experiment", "default"));
    auto report = simulate(ir, opts);
    json out = json::parse(report_json(report));
    out["unit"] = unit;
    out["diagnostics"] = diagnostics_json(diags);
    return ok(200, out);
  }

  if (is({"events"})) {
    if (m != "POST") return method_not_allowed();
    json body = parse_body(req);
    CustomEvent e;
    e.timestamp_ms = now_ms();
    e.namespace_name = required<std::string>(body, "namespace");
    e.experiment = optional_field<std::string>(body, "experiment", "");
    e.inputs = map_field(body, "inputs");
    e.name = required<std::string>(body, "event");
    e.payload = map_field(body, "payload");
    if (e.name.empty()) throw HttpError{400, "event name must not be empty", "InvalidArgument"};
    store_->snapshot()->at(e.namespace_name);
    if (!logger_) throw HttpError{503, "no event sink is configured", "SinkUnavailable"};
    logger_->log_event(e);
    return ok(202, {{"accepted", true}});
  }

  if (is({"namespaces"})) {
    if (m == "GET") {
      auto snap = store_->snapshot();
      json list = json::array();
      for (const auto& [_, ns] : snap->namespaces) list.push_back(namespace_summary(*ns));
      return ok(200, {{"version", snap->version}, {"namespaces", std::move(list)}});
    }
    if (m != "POST") return method_not_allowed();
    json body = parse_body(req);
    auto expected = expected_version(body);
    auto name = required<std::string>(body, "name");
    auto version = store_->create_namespace(name, required<std::string>(body, "primary_unit"),
                                            optional_field<int>(body, "num_segments", 10000),
                                            map_field(body, "launch_defaults"), expected);
    return ok(201, {{"version", version}, {"namespace", namespace_summary(store_->snapshot()->at(name))}});
  }

  if (parts.size() >= 2 && parts[0] == "namespaces") {
    const std::string& ns_name = parts[1];

    if (parts.size() == 2) {
      if (m != "GET") return method_not_allowed();
      auto snap = store_->snapshot();
      json out = namespace_detail(snap->at(ns_name));
      out["version"] = snap->version;
      return ok(200, out);
    }

    if (is({"namespaces", "*", "segments"})) {
      if (m != "GET") return method_not_allowed();
      auto snap = store_->snapshot();
      const Namespace& ns = snap->at(ns_name);
      json segs = json::array();
      for (const auto& owner : ns.segment_map) segs.push_back(owner.empty() ? json(nullptr) : json(owner));
      return ok(200, {{"version", snap->version}, {"num_segments", ns.num_segments}, {"segments", std::move(segs)}});
    }

    if (is({"namespaces", "*", "experiments"})) {
      if (m == "GET") {
        auto snap = store_->snapshot();
        json list = json::array();
        for (const auto& [_, e] : snap->at(ns_name).experiments) list.push_back(experiment_json(e));
        return ok(200, {{"version", snap->version}, {"experiments", std::move(list)}});
      }
      if (m != "POST") return method_not_allowed();
      json body = parse_body(req);
      auto expected = expected_version(body);
      auto name = required<std::string>(body, "name");
      ScriptIR ir = script_from(body);
      auto diags = validate(ir);
      if (has_errors(diags)) {
        throw HttpError{422, "script does not validate", "InvalidScript", json{{"diagnostics", diagnostics_json(diags)}}};
      }
      auto result = store_->allocate_experiment(ns_name, name, ir, required<int>(body, "segments"), expected);
      return ok(201, {{"version", result.version},
                      {"experiment", experiment_json(result.experiment)},
                      {"warnings", result.warnings},
                      {"diagnostics", diagnostics_json(diags)}});
    }

    if (is({"namespaces", "*", "experiments", "*", "deallocate"})) {
      if (m != "POST") return method_not_allowed();
      json body = parse_body(req);
      std::uint64_t version = 0;
      auto prior = store_->deallocate_experiment(ns_name, parts[3], &version, expected_version(body));
      return ok(200, {{"version", version}, {"prior_status", std::string(status_name(prior))}});
    }

    if (is({"namespaces", "*", "defaults", "*"})) {
      if (m != "PUT") return method_not_allowed();
      json body = parse_body(req);
      if (!body.contains("value")) throw HttpError{400, "missing field 'value'", "InvalidArgument"};
      auto version = store_->set_launch_value(ns_name, parts[3], from_json(body["value"]), expected_version(body));
      return ok(200, {{"version", version}});
    }

    if (is({"namespaces", "*", "assignment"})) {
      if (m != "GET") return method_not_allowed();
      auto snap = store_->snapshot();
      const Namespace& ns = snap->at(ns_name);
      auto unit_it = req.query.find(ns.primary_unit);
      if (unit_it == req.query.end()) {
        throw HttpError{400, "missing primary unit '" + ns.primary_unit + "'", "InvalidArgument"};
      }
      Inputs inputs;
      Overrides overrides;
      const std::string override_key = "ns_" + ns.name;
      for (const auto& [k, v] : req.query) {
        if (k == override_key) {
          overrides = parse_override_string(v);
        } else if (k != ns.primary_unit) {
          inputs[k] = parse_typed_scalar(v);
        }
      }
      Value unit = parse_typed_scalar(unit_it->second);
      auto a = store_->assign(ns.name, unit, inputs, overrides);
      // The service stands in for the application reading every parameter.
      Value::Map params = a.params();
      for (const auto& [k, _] : params) a.get(k);
      inputs[ns.primary_unit] = unit;
      return ok(200, {{"namespace", ns.name},
                      {"experiment", a.experiment() ? json(*a.experiment()) : json(nullptr)},
                      {"segment", a.segment()},
                      {"inputs", to_json(Value(inputs))},
                      {"params", to_json(Value(params))},
                      {"frozen", a.frozen()},
                      {"exposure_logged", a.exposed() && logger_ != nullptr},
                      {"version", a.version()}});
    }
  }

  throw HttpError{404, "no route for " + m + " " + req.path, "NotFound"};
}

// --- HTTP adapter ---------------------------------------------------------------------

struct HttpServer::Impl {
  std::shared_ptr<ApiService> service;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<ApiService> service) : impl_(std::make_unique<Impl>()) {
  impl_->service = std::move(service);
  auto handler = [svc = impl_->service](const httplib::Request& hreq, httplib::Response& hres) {
    ApiRequest req;
    req.method = hreq.method;
    req.path = hreq.path;
    req.body = hreq.body;
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    ApiResponse resp = svc->handle(req);
    hres.status = resp.status;
    for (const auto& [k, v] : resp.headers) {
      if (k != "Content-Type") hres.set_header(k, v);
    }
    if (!resp.body.empty()) hres.set_content(resp.body, "application/json");
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
  impl_->server.Put(".*", handler);
  impl_->server.Options(".*", handler);
  impl_->server.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::InvalidArgument, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::InvalidArgument, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace planout
