#include "planout/namespace_manager.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "planout/error.hpp"
#include "planout/random_ops.hpp"

namespace planout {

using nlohmann::json;

namespace {

constexpr int kStoreFormatVersion = 1;
constexpr const char* kStoreFormat = "planout-store";

void check_name(const std::string& name, const char* what) {
  if (name.empty()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be empty");
  check_salt_component(name, what);
  if (name.front() == '_') {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + " '" + name + "' must not start with '_'");
  }
}

Namespace& writable(StoreSnapshot& s, const std::string& name) {
  auto it = s.namespaces.find(name);
  if (it == s.namespaces.end()) throw Error(ErrorCode::UnknownNamespace, "unknown namespace '" + name + "'");
  auto copy = std::make_shared<Namespace>(*it->second);
  Namespace& ref = *copy;
  it->second = std::move(copy);
  return ref;
}

/// Deterministic choice of `count` segments from the free pool: a salted
/// Fisher-Yates shuffle of the free list under (ns, experiment, "_alloc").
std::vector<int> choose_segments(const Namespace& ns, const std::string& experiment, int count) {
  Value::List free;
  for (int i = 0; i < ns.num_segments; ++i) {
    if (ns.segment_map[static_cast<std::size_t>(i)].empty()) free.emplace_back(std::int64_t{i});
  }
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "an experiment needs at least one segment");
  if (static_cast<std::size_t>(count) > free.size()) {
    throw Error(ErrorCode::InsufficientSegments,
                "requested " + std::to_string(count) + " segments but only " +
                    std::to_string(free.size()) + " are free in '" + ns.name + "'");
  }
  SaltContext ctx(ns.name, experiment, "_alloc");
  const Value unit("segments");
  Value::List picked = sample(free, count, ctx, std::span<const Value>(&unit, 1));
  std::vector<int> out;
  out.reserve(picked.size());
  for (const auto& v : picked) out.push_back(static_cast<int>(v.as_int()));
  std::sort(out.begin(), out.end());
  return out;
}

// --- Actions ----------------------------------------------------------------------
// Each apply_* mutates a snapshot copy and returns the action record that
// replays it.

json apply_create(StoreSnapshot& s, const std::string& name, const std::string& primary_unit,
                  int num_segments, Value::Map defaults) {
  check_name(name, "namespace name");
  if (primary_unit.empty()) throw Error(ErrorCode::InvalidArgument, "primary unit must not be empty");
  if (num_segments < 1) throw Error(ErrorCode::InvalidArgument, "num_segments must be at least 1");
  if (s.namespaces.count(name)) throw Error(ErrorCode::DuplicateNamespace, "namespace '" + name + "' exists");
  auto ns = std::make_shared<Namespace>();
  ns->name = name;
  ns->primary_unit = primary_unit;
  ns->num_segments = num_segments;
  ns->segment_map.assign(static_cast<std::size_t>(num_segments), std::string());
  ns->launch_defaults = std::move(defaults);
  s.namespaces.emplace(name, ns);
  return {{"op", "create_namespace"},
          {"namespace", name},
          {"primary_unit", primary_unit},
          {"num_segments", num_segments},
          {"launch_defaults", to_json(Value(ns->launch_defaults))}};
}

std::pair<json, std::vector<std::string>> apply_allocate(StoreSnapshot& s, const std::string& ns_name,
                                                         const std::string& experiment,
                                                         const ScriptIR& ir, int count,
                                                         std::int64_t created_at) {
  check_name(experiment, "experiment name");
  auto diags = validate(ir);
  if (has_errors(diags)) {
    std::string msg = "script for '" + experiment + "' does not validate:";
    for (const auto& d : diags) {
      if (d.is_error()) msg += "\n  " + format_diagnostic(d);
    }
    throw Error(ErrorCode::InvalidScript, msg);
  }
  Namespace& ns = writable(s, ns_name);
  if (ns.experiments.count(experiment)) {
    throw Error(ErrorCode::DuplicateExperiment,
                "experiment '" + experiment + "' already exists in '" + ns_name + "'");
  }
  ExperimentDef def;
  def.name = experiment;
  def.ir = ir;
  def.digest = script_digest(ir);
  def.segments = choose_segments(ns, experiment, count);
  def.created_at_ms = created_at;
  def.parameters = list_parameters(ir);
  for (int seg : def.segments) ns.segment_map[static_cast<std::size_t>(seg)] = experiment;

  std::vector<std::string> warnings;
  for (const auto& p : def.parameters) {
    for (const auto& [other_name, other] : s.namespaces) {
      if (other_name == ns_name) continue;
      bool shared = other->launch_defaults.count(p) > 0;
      for (const auto& [_, e] : other->experiments) {
        if (e.status == ExperimentStatus::Active &&
            std::find(e.parameters.begin(), e.parameters.end(), p) != e.parameters.end()) {
          shared = true;
        }
      }
      if (shared) {
        warnings.push_back("parameter '" + p + "' is also set in namespace '" + other_name +
                           "'; experiments there are not mutually exclusive with '" + experiment + "'");
      }
    }
  }
  json record = {{"op", "allocate"},
                 {"namespace", ns_name},
                 {"experiment", experiment},
                 {"script", to_json(ir)},
                 {"num_segments", count},
                 {"segments", def.segments},
                 {"created_at", created_at}};
  ns.experiments.emplace(experiment, std::move(def));
  return {std::move(record), std::move(warnings)};
}

std::pair<json, ExperimentStatus> apply_deallocate(StoreSnapshot& s, const std::string& ns_name,
                                                   const std::string& experiment) {
  Namespace& ns = writable(s, ns_name);
  auto it = ns.experiments.find(experiment);
  if (it == ns.experiments.end()) {
    throw Error(ErrorCode::UnknownExperiment,
                "unknown experiment '" + experiment + "' in '" + ns_name + "'");
  }
  ExperimentStatus prior = it->second.status;
  if (prior == ExperimentStatus::Active) {
    for (int seg : it->second.segments) ns.segment_map[static_cast<std::size_t>(seg)].clear();
    it->second.status = ExperimentStatus::Deallocated;
  }
  return {{{"op", "deallocate"}, {"namespace", ns_name}, {"experiment", experiment}}, prior};
}

json apply_set_default(StoreSnapshot& s, const std::string& ns_name, const std::string& parameter,
                       Value value) {
  if (parameter.empty()) throw Error(ErrorCode::InvalidArgument, "parameter name must not be empty");
  Namespace& ns = writable(s, ns_name);
  json record = {{"op", "set_launch_value"},
                 {"namespace", ns_name},
                 {"parameter", parameter},
                 {"value", to_json(value)}};
  ns.launch_defaults[parameter] = std::move(value);
  return record;
}

// --- Snapshot (de)serialization ------------------------------------------------------

json snapshot_json(const StoreSnapshot& s) {
  json namespaces = json::object();
  for (const auto& [name, ns] : s.namespaces) {
    json experiments = json::object();
    for (const auto& [ename, e] : ns->experiments) {
      experiments[ename] = {{"script", to_json(e.ir)},
                            {"segments", e.segments},
                            {"created_at", e.created_at_ms},
                            {"status", std::string(status_name(e.status))}};
    }
    namespaces[name] = {{"primary_unit", ns->primary_unit},
                        {"num_segments", ns->num_segments},
                        {"launch_defaults", to_json(Value(ns->launch_defaults))},
                        {"experiments", std::move(experiments)}};
  }
  return {{"version", s.version}, {"namespaces", std::move(namespaces)}};
}

StoreSnapshot snapshot_from_json(const json& j) {
  StoreSnapshot s;
  s.version = j.at("version").get<std::uint64_t>();
  for (const auto& [name, nj] : j.at("namespaces").items()) {
    auto ns = std::make_shared<Namespace>();
    ns->name = name;
    ns->primary_unit = nj.at("primary_unit").get<std::string>();
    ns->num_segments = nj.at("num_segments").get<int>();
    if (ns->num_segments < 1) throw Error(ErrorCode::StoreCorrupt, "bad segment count for '" + name + "'");
    ns->segment_map.assign(static_cast<std::size_t>(ns->num_segments), std::string());
    ns->launch_defaults = from_json(nj.at("launch_defaults")).as_map();
    for (const auto& [ename, ej] : nj.at("experiments").items()) {
      ExperimentDef e;
      e.name = ename;
      e.ir = ir_from_json(ej.at("script"));
      e.digest = script_digest(e.ir);
      e.segments = ej.at("segments").get<std::vector<int>>();
      e.created_at_ms = ej.at("created_at").get<std::int64_t>();
      std::string status = ej.at("status").get<std::string>();
      if (status == "active") {
        e.status = ExperimentStatus::Active;
      } else if (status == "deallocated") {
        e.status = ExperimentStatus::Deallocated;
      } else {
        throw Error(ErrorCode::StoreCorrupt, "unknown experiment status '" + status + "'");
      }
      e.parameters = list_parameters(e.ir);
      if (e.status == ExperimentStatus::Active) {
        for (int seg : e.segments) {
          if (seg < 0 || seg >= ns->num_segments || !ns->segment_map[static_cast<std::size_t>(seg)].empty()) {
            throw Error(ErrorCode::StoreCorrupt, "segment " + std::to_string(seg) + " of '" + ename +
                                                     "' is out of range or allocated twice");
          }
          ns->segment_map[static_cast<std::size_t>(seg)] = ename;
        }
      }
      ns->experiments.emplace(ename, std::move(e));
    }
    s.namespaces.emplace(name, std::move(ns));
  }
  return s;
}

json header_json() { return {{"format", kStoreFormat}, {"format_version", kStoreFormatVersion}}; }

}  // namespace

std::string_view status_name(ExperimentStatus status) {
  return status == ExperimentStatus::Active ? "active" : "deallocated";
}

int Namespace::free_segments() const {
  return static_cast<int>(std::count_if(segment_map.begin(), segment_map.end(),
                                        [](const std::string& s) { return s.empty(); }));
}

const Namespace& StoreSnapshot::at(std::string_view name) const {
  auto it = namespaces.find(name);
  if (it == namespaces.end()) {
    throw Error(ErrorCode::UnknownNamespace, "unknown namespace '" + std::string(name) + "'");
  }
  return *it->second;
}

int segment_of(const Namespace& ns, const Value& unit) {
  SaltContext ctx(ns.name, "_segment", "_segment");
  HashDraw d = hash_draw(ctx, std::span<const Value>(&unit, 1));
  return static_cast<int>(d.integer % static_cast<std::uint64_t>(ns.num_segments));
}

// --- NamespaceAssignment ----------------------------------------------------------------

NamespaceAssignment::NamespaceAssignment(std::string ns, int segment,
                                         std::optional<std::string> experiment,
                                         std::optional<Assignment> assignment, Value::Map defaults,
                                         Overrides overrides, std::uint64_t version)
    : namespace_(std::move(ns)),
      segment_(segment),
      experiment_(std::move(experiment)),
      assignment_(std::move(assignment)),
      defaults_(std::move(defaults)),
      overrides_(std::move(overrides)),
      version_(version) {}

bool NamespaceAssignment::serves_experiment() const {
  return assignment_.has_value() && assignment_->in_experiment();
}

Value NamespaceAssignment::get(std::string_view name, Value fallback) const {
  if (serves_experiment() && assignment_->contains(name)) return assignment_->get(name);
  if (auto it = overrides_.find(name); it != overrides_.end()) return it->second;
  if (auto it = defaults_.find(name); it != defaults_.end()) return it->second;
  return fallback;
}

Value::Map NamespaceAssignment::params() const {
  Value::Map out = defaults_;
  for (const auto& [k, v] : overrides_) out[k] = v;
  if (serves_experiment()) {
    for (const auto& [k, v] : assignment_->params()) out[k] = v;
  }
  return out;
}

bool NamespaceAssignment::exposed() const noexcept {
  return assignment_.has_value() && assignment_->exposed();
}

std::vector<std::string> NamespaceAssignment::frozen() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : overrides_) out.push_back(k);
  return out;
}

// --- NamespaceStore -------------------------------------------------------------------

NamespaceStore::NamespaceStore() : snapshot_(std::make_shared<const StoreSnapshot>()) {}

NamespaceStore::~NamespaceStore() = default;

std::shared_ptr<const StoreSnapshot> NamespaceStore::snapshot() const {
  return std::atomic_load(&snapshot_);
}

void NamespaceStore::set_logger(std::shared_ptr<ExposureLogger> logger) {
  std::atomic_store(&logger_, std::move(logger));
}

void NamespaceStore::append_line(const std::string& line) {
  if (!path_) return;
  log_ << line << '\n';
  log_.flush();
  if (!log_) throw Error(ErrorCode::StoreCorrupt, "cannot append to store " + path_->string());
}

std::uint64_t NamespaceStore::commit(std::optional<std::uint64_t> expected_version,
                                     const Mutation& mutate) {
  std::lock_guard lock(writer_mu_);
  auto current = snapshot();
  if (expected_version && *expected_version != current->version) {
    throw Error(ErrorCode::VersionConflict, "store is at version " + std::to_string(current->version) +
                                                ", not " + std::to_string(*expected_version));
  }
  auto next = std::make_shared<StoreSnapshot>(*current);
  json action = mutate(*next);
  next->version = current->version + 1;
  append_line(json{{"version", next->version}, {"action", std::move(action)}}.dump());
  if (path_ && ++records_since_snapshot_ >= snapshot_interval_) {
    append_line(json{{"snapshot", snapshot_json(*next)}}.dump());
    records_since_snapshot_ = 0;
  }
  std::atomic_store(&snapshot_, std::shared_ptr<const StoreSnapshot>(std::move(next)));
  return current->version + 1;
}

std::uint64_t NamespaceStore::create_namespace(const std::string& name, const std::string& primary_unit,
                                               int num_segments, Value::Map launch_defaults,
                                               std::optional<std::uint64_t> expected_version) {
  return commit(expected_version, [&](StoreSnapshot& s) {
    return apply_create(s, name, primary_unit, num_segments, launch_defaults);
  });
}

AllocationResult NamespaceStore::allocate_experiment(const std::string& ns, const std::string& experiment,
                                                     const ScriptIR& ir, int num_segments,
                                                     std::optional<std::uint64_t> expected_version) {
  AllocationResult result;
  std::int64_t created = now_ms();
  result.version = commit(expected_version, [&](StoreSnapshot& s) {
    auto [record, warnings] = apply_allocate(s, ns, experiment, ir, num_segments, created);
    result.warnings = std::move(warnings);
    return record;
  });
  result.experiment = snapshot()->at(ns).experiments.find(experiment)->second;
  return result;
}

ExperimentStatus NamespaceStore::deallocate_experiment(const std::string& ns, const std::string& experiment,
                                                       std::uint64_t* new_version,
                                                       std::optional<std::uint64_t> expected_version) {
  ExperimentStatus prior = ExperimentStatus::Active;
  std::uint64_t v = commit(expected_version, [&](StoreSnapshot& s) {
    auto [record, status] = apply_deallocate(s, ns, experiment);
    prior = status;
    return record;
  });
  if (new_version) *new_version = v;
  return prior;
}

std::uint64_t NamespaceStore::set_launch_value(const std::string& ns, const std::string& parameter,
                                               Value value, std::optional<std::uint64_t> expected_version) {
  return commit(expected_version, [&](StoreSnapshot& s) {
    return apply_set_default(s, ns, parameter, value);
  });
}

NamespaceAssignment NamespaceStore::assign(const std::string& ns_name, const Value& unit,
                                           const Inputs& inputs, const Overrides& overrides) const {
  auto snap = snapshot();
  const Namespace& ns = snap->at(ns_name);
  int segment = segment_of(ns, unit);
  const std::string& owner = ns.segment_map[static_cast<std::size_t>(segment)];
  if (owner.empty()) {
    return NamespaceAssignment(ns.name, segment, std::nullopt, std::nullopt, ns.launch_defaults,
                               overrides, snap->version);
  }
  const ExperimentDef& exp = ns.experiments.find(owner)->second;
  Inputs all = inputs;
  all[ns.primary_unit] = unit;
  Assignment a = evaluate(exp.ir, all, overrides, SaltContext(ns.name, exp.name));
  if (auto logger = std::atomic_load(&logger_)) {
    a.set_exposure_hook([logger, ns_name = ns.name, exp_name = exp.name, digest = exp.digest, all,
                         overrides](const Assignment& assigned) {
      ExposureEvent e;
      e.timestamp_ms = now_ms();
      e.namespace_name = ns_name;
      e.experiment = exp_name;
      e.inputs = all;
      e.params = assigned.params_map();
      e.overrides = overrides;
      e.script_digest = digest;
      logger->log_exposure(e);
    });
  }
  return NamespaceAssignment(ns.name, segment, exp.name, std::move(a), ns.launch_defaults, overrides,
                             snap->version);
}

// --- Persistence -------------------------------------------------------------------------

std::string snapshot_text(const StoreSnapshot& snapshot) { return snapshot_json(snapshot).dump(); }

void NamespaceStore::replay(std::istream& in, const std::string& origin) {
  auto corrupt = [&](std::size_t line_no, const std::string& why) {
    return Error(ErrorCode::StoreCorrupt, origin + ":" + std::to_string(line_no) + ": " + why);
  };
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.empty()) return;

  json header;
  try {
    header = json::parse(lines[0]);
  } catch (const json::exception&) {
    throw corrupt(1, "missing store header");
  }
  if (!header.is_object() || header.value("format", "") != kStoreFormat) throw corrupt(1, "not a store file");
  if (header.value("format_version", 0) != kStoreFormatVersion) {
    throw corrupt(1, "unsupported store format version");
  }

  // Start from the last complete snapshot, then replay the actions after it.
  // A final line cut short by a crash is ignored.
  std::vector<json> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      records.push_back(json::parse(lines[i]));
    } catch (const json::exception&) {
      if (i + 1 == lines.size()) break;
      throw corrupt(i + 1, "unparsable record");
    }
  }
  std::size_t start = 0;
  StoreSnapshot state;
  for (std::size_t i = records.size(); i-- > 0;) {
    if (records[i].contains("snapshot")) {
      try {
        state = snapshot_from_json(records[i]["snapshot"]);
      } catch (const json::exception& e) {
        throw corrupt(0, std::string("bad snapshot: ") + e.what());
      }
      start = i + 1;
      break;
    }
  }
  for (std::size_t i = start; i < records.size(); ++i) {
    const json& r = records[i];
    if (r.contains("snapshot")) continue;
    try {
      std::uint64_t version = r.at("version").get<std::uint64_t>();
      if (version != state.version + 1) throw corrupt(0, "version gap at " + std::to_string(version));
      const json& a = r.at("action");
      std::string op = a.at("op").get<std::string>();
      std::string ns = a.at("namespace").get<std::string>();
      if (op == "create_namespace") {
        apply_create(state, ns, a.at("primary_unit").get<std::string>(), a.at("num_segments").get<int>(),
                     from_json(a.at("launch_defaults")).as_map());
      } else if (op == "allocate") {
        std::string exp = a.at("experiment").get<std::string>();
        apply_allocate(state, ns, exp, ir_from_json(a.at("script")), a.at("num_segments").get<int>(),
                       a.at("created_at").get<std::int64_t>());
        auto recorded = a.at("segments").get<std::vector<int>>();
        if (state.at(ns).experiments.find(exp)->second.segments != recorded) {
          throw corrupt(0, "replayed allocation of '" + exp + "' differs from the recorded segments");
        }
      } else if (op == "deallocate") {
        apply_deallocate(state, ns, a.at("experiment").get<std::string>());
      } else if (op == "set_launch_value") {
        apply_set_default(state, ns, a.at("parameter").get<std::string>(), from_json(a.at("value")));
      } else {
        throw corrupt(0, "unknown action '" + op + "'");
      }
      state.version = version;
    } catch (const json::exception& e) {
      throw corrupt(0, std::string("bad action record: ") + e.what());
    }
  }
  records_since_snapshot_ = static_cast<int>(records.size() - start);
  std::atomic_store(&snapshot_, std::shared_ptr<const StoreSnapshot>(
                                    std::make_shared<StoreSnapshot>(std::move(state))));
}

std::unique_ptr<NamespaceStore> NamespaceStore::open(const std::filesystem::path& path) {
  auto store = std::make_unique<NamespaceStore>();
  bool exists = std::filesystem::exists(path);
  if (exists) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StoreCorrupt, "cannot read store " + path.string());
    store->replay(in, path.string());
  }
  store->log_.open(path, std::ios::app | std::ios::binary);
  if (!store->log_) throw Error(ErrorCode::StoreCorrupt, "cannot open store " + path.string());
  store->path_ = path;
  if (!exists || std::filesystem::file_size(path) == 0) {
    store->append_line(header_json().dump());
    if (store->version() > 0) store->append_line(json{{"snapshot", snapshot_json(*store->snapshot())}}.dump());
  }
  return store;
}

void NamespaceStore::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << header_json().dump() << '\n' << json{{"snapshot", snapshot_json(*snapshot())}}.dump() << '\n';
    if (!out) throw Error(ErrorCode::StoreCorrupt, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<NamespaceStore> NamespaceStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StoreCorrupt, "cannot read store " + path.string());
  auto store = std::make_unique<NamespaceStore>();
  store->replay(in, path.string());
  return store;
}

}  // namespace planout
