#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "planout/exposure_log.hpp"
#include "planout/interpreter.hpp"
#include "planout/namespace_manager.hpp"

namespace planout {

/// Parses `param:value,param2:value2`. Values are typed as integer, then
/// float, then string; whitespace around keys and values is dropped. Throws
/// MalformedOverride for a pair without ':' or with an empty key or value.
Overrides parse_override_string(std::string_view raw);

/// Canonical form: pairs in key order, booleans as 1/0, floats always with a
/// '.' or exponent. Throws MalformedOverride for values that cannot be
/// written back (lists, maps, null, strings with ',' or that read as numbers).
std::string format_override_string(const Overrides& overrides);

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

struct ApiOptions {
  std::string cors_origin = "*";
  /// Upper bound on units for POST /simulate.
  std::uint64_t max_simulation_units = 2'000'000;
  int simulation_jobs = 1;
};

/// REST surface over a namespace store. Routes:
///   GET  /health
///   POST /compile                              {"script"}
///   POST /simulate                             {"script" | "ir", "n", "unit", "pairs", ...}
///   GET  /namespaces
///   POST /namespaces                           {"name", "primary_unit", "num_segments", "launch_defaults", "expected_version"}
///   GET  /namespaces/{ns}
///   GET  /namespaces/{ns}/segments
///   POST /namespaces/{ns}/experiments          {"name", "script" | "ir", "segments", "expected_version"}
///   POST /namespaces/{ns}/experiments/{exp}/deallocate   {"expected_version"}
///   PUT  /namespaces/{ns}/defaults/{param}     {"value", "expected_version"}
///   GET  /namespaces/{ns}/assignment?{unit}=..&{input}=..&ns_{ns}=overrides
///   POST /events                               {"namespace", "experiment", "inputs", "event", "payload"}
class ApiService {
 public:
  ApiService(std::shared_ptr<NamespaceStore> store, std::shared_ptr<ExposureLogger> logger = nullptr,
             ApiOptions options = {});

  /// Never throws; errors become JSON bodies {"error", "code"}.
  ApiResponse handle(const ApiRequest& request) const;

  NamespaceStore& store() const { return *store_; }

 private:
  ApiResponse route(const ApiRequest& request) const;

  std::shared_ptr<NamespaceStore> store_;
  std::shared_ptr<ExposureLogger> logger_;
  ApiOptions options_;
};

/// Serves `service` over HTTP until stop() is called.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<ApiService> service);
  ~HttpServer();

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace planout
