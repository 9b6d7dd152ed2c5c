#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "planout/interpreter.hpp"
#include "planout/ir.hpp"
#include "planout/random_ops.hpp"
#include "planout/value.hpp"

namespace planout {

/// Cell label used when a parameter is not set for a unit.
inline constexpr const char* kUnsetCell = "<unset>";

/// One swept input: values 0..count-1, or hashed id strings.
struct UnitAxis {
  std::string name;
  std::int64_t count = 0;
};

struct SimulationOptions {
  /// Units are the cartesian product of the axes, first axis slowest.
  std::vector<UnitAxis> axes;
  /// Replace each swept integer with a pseudo-random id string derived from it.
  bool hashed_ids = false;
  /// Fixed inputs added to every unit.
  Inputs fixed_inputs;
  /// Called with the unit index and its inputs; may add or change inputs.
  std::function<void(std::uint64_t, Inputs&)> extra_inputs;
  Overrides overrides;
  /// Parameter pairs to cross-tabulate. Empty means every pair of the
  /// script's parameters.
  std::vector<std::pair<std::string, std::string>> pairs;
  SaltContext context{"default", "default"};
  int jobs = 1;
};

using CellCounts = std::map<std::string, std::uint64_t>;
using JointCounts = std::map<std::pair<std::string, std::string>, std::uint64_t>;

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
};

struct SimulationReport {
  std::uint64_t n = 0;
  /// Units for which the script did not return false.
  std::uint64_t in_experiment = 0;
  /// Parameter -> cell (canonical text of the value) -> count.
  std::map<std::string, CellCounts> marginals;
  std::map<std::pair<std::string, std::string>, JointCounts> joints;

  double frequency(const std::string& param, const std::string& cell) const;
  /// P(a = cell_a | b = cell_b) for every observed cell_b, cell_a.
  std::map<std::string, std::map<std::string, double>> conditional(const std::string& a,
                                                                   const std::string& b) const;
  /// Associative merge of partial reports.
  void merge(const SimulationReport& other);
};

SimulationReport simulate(const ScriptIR& ir, const SimulationOptions& options);

/// Pearson statistic against expected probabilities; dof = cells - 1.
/// Throws ExpectedTooSmall if any expected count is below 5 and
/// InvalidArgument if the probabilities do not sum to 1.
ChiSquare chi_square(const std::vector<std::uint64_t>& observed, const std::vector<double>& expected);

/// Pearson test of independence on a joint table; nullopt if any expected
/// cell count is below 5 or either margin has one cell.
std::optional<ChiSquare> independence_chi_square(const SimulationReport& report, const std::string& a,
                                                 const std::string& b);

/// max over cells |P(a,b) - P(a)P(b)|. Throws UnknownParameter.
double independence_table(const SimulationReport& report, const std::string& a, const std::string& b);

std::string report_json(const SimulationReport& report);
std::string report_table(const SimulationReport& report);

}  // namespace planout
