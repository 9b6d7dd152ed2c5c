#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "planout/exposure_log.hpp"
#include "planout/interpreter.hpp"
#include "planout/ir.hpp"
#include "planout/value.hpp"

namespace planout {

enum class ExperimentStatus { Active, Deallocated };

std::string_view status_name(ExperimentStatus status);

struct ExperimentDef {
  std::string name;
  ScriptIR ir;
  std::string digest;
  /// Ascending. Kept after deallocation for audit.
  std::vector<int> segments;
  std::int64_t created_at_ms = 0;
  ExperimentStatus status = ExperimentStatus::Active;
  std::vector<std::string> parameters;
};

struct Namespace {
  std::string name;
  std::string primary_unit;
  int num_segments = 0;
  /// Segment -> experiment name; empty string for unallocated.
  std::vector<std::string> segment_map;
  Value::Map launch_defaults;
  std::map<std::string, ExperimentDef, std::less<>> experiments;

  int free_segments() const;
};

/// Immutable view of the whole store at one version.
struct StoreSnapshot {
  std::uint64_t version = 0;
  std::map<std::string, std::shared_ptr<const Namespace>, std::less<>> namespaces;

  const Namespace& at(std::string_view name) const;  // UnknownNamespace
};

/// Segment of a unit: hash under salt (ns, "_segment", "_segment") mod num_segments.
int segment_of(const Namespace& ns, const Value& unit);

/// Result of an assignment request against a namespace.
class NamespaceAssignment {
 public:
  NamespaceAssignment(std::string ns, int segment, std::optional<std::string> experiment,
                      std::optional<Assignment> assignment, Value::Map defaults,
                      Overrides overrides, std::uint64_t version);

  const std::string& namespace_name() const noexcept { return namespace_; }
  int segment() const noexcept { return segment_; }
  /// Name of the experiment owning the segment, if any.
  const std::optional<std::string>& experiment() const noexcept { return experiment_; }
  const std::optional<Assignment>& assignment() const noexcept { return assignment_; }
  std::uint64_t version() const noexcept { return version_; }

  /// Experiment value (logging exposure), then an override, then the launch
  /// default, then `fallback`.
  Value get(std::string_view name, Value fallback = Value()) const;
  /// Launch defaults overlaid with overrides and experiment parameters. Does
  /// not log exposure.
  Value::Map params() const;
  bool exposed() const noexcept;
  /// Names whose value came from an override.
  std::vector<std::string> frozen() const;

 private:
  bool serves_experiment() const;

  std::string namespace_;
  int segment_;
  std::optional<std::string> experiment_;
  std::optional<Assignment> assignment_;
  Value::Map defaults_;
  Overrides overrides_;
  std::uint64_t version_;
};

struct AllocationResult {
  ExperimentDef experiment;
  std::uint64_t version = 0;
  /// Parameters also set in other namespaces (cross-namespace exclusivity is
  /// not enforced, only reported).
  std::vector<std::string> warnings;
};

/// Namespaces, their segment allocations and launch defaults.
///
/// Reads work on an immutable snapshot that mutations replace atomically;
/// mutations are serialized. Every mutation takes an optional expected
/// version and fails with VersionConflict if the store has moved on.
///
/// A store opened on a file appends one record per mutation and a full
/// snapshot every `snapshot_interval` records.
class NamespaceStore {
 public:
  NamespaceStore();
  ~NamespaceStore();

  /// Loads `path` if it exists (creating it otherwise) and appends future
  /// mutations to it. Throws StoreCorrupt.
  static std::unique_ptr<NamespaceStore> open(const std::filesystem::path& path);

  std::shared_ptr<const StoreSnapshot> snapshot() const;
  std::uint64_t version() const { return snapshot()->version; }

  std::uint64_t create_namespace(const std::string& name, const std::string& primary_unit,
                                 int num_segments, Value::Map launch_defaults,
                                 std::optional<std::uint64_t> expected_version = std::nullopt);

  AllocationResult allocate_experiment(const std::string& ns, const std::string& experiment,
                                       const ScriptIR& ir, int num_segments,
                                       std::optional<std::uint64_t> expected_version = std::nullopt);

  /// Idempotent: returns the status the experiment had before the call.
  ExperimentStatus deallocate_experiment(const std::string& ns, const std::string& experiment,
                                         std::uint64_t* new_version = nullptr,
                                         std::optional<std::uint64_t> expected_version = std::nullopt);

  std::uint64_t set_launch_value(const std::string& ns, const std::string& parameter, Value value,
                                 std::optional<std::uint64_t> expected_version = std::nullopt);

  /// `inputs` are extra script inputs; the primary unit is added under the
  /// namespace's primary unit name.
  NamespaceAssignment assign(const std::string& ns, const Value& unit, const Inputs& inputs = {},
                             const Overrides& overrides = {}) const;

  /// Exposures from assign() go to this logger (none by default).
  void set_logger(std::shared_ptr<ExposureLogger> logger);

  /// Writes a header and a single snapshot record to `path`.
  void save(const std::filesystem::path& path) const;
  /// Reads a store file into a detached in-memory store.
  static std::unique_ptr<NamespaceStore> load(const std::filesystem::path& path);

  void set_snapshot_interval(int records) { snapshot_interval_ = records; }

 private:
  using Mutation = std::function<nlohmann::json(StoreSnapshot&)>;
  std::uint64_t commit(std::optional<std::uint64_t> expected_version, const Mutation& mutate);
  void replay(std::istream& in, const std::string& origin);
  void append_line(const std::string& line);

  std::shared_ptr<const StoreSnapshot> snapshot_;
  std::mutex writer_mu_;
  std::optional<std::filesystem::path> path_;
  std::ofstream log_;
  int snapshot_interval_ = 64;
  int records_since_snapshot_ = 0;
  std::shared_ptr<ExposureLogger> logger_;
};

/// Canonical text of a whole snapshot (used by save and by tests).
std::string snapshot_text(const StoreSnapshot& snapshot);

}  // namespace planout
