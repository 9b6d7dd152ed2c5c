#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "planout/ir.hpp"
#include "planout/random_ops.hpp"
#include "planout/value.hpp"

namespace planout {

using Inputs = Value::Map;
using Overrides = Value::Map;

class Assignment;

/// Called at most once per evaluated assignment, on the first get() that
/// returns a script-set value.
using ExposureHook = std::function<void(const Assignment&)>;

/// Result of one evaluation: parameters in script assignment order plus the
/// context they were drawn under. Copies share one exposure flag.
class Assignment {
 public:
  using Params = std::vector<std::pair<std::string, Value>>;

  Assignment(Params params, SaltContext ctx, bool in_experiment);

  const Params& params() const noexcept { return params_; }
  const SaltContext& context() const noexcept { return ctx_; }
  /// False when the script ended with a falsy `return`.
  bool in_experiment() const noexcept { return in_experiment_; }

  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const Value* find(std::string_view name) const;

  /// The script-set value (marking exposure), or `fallback` without marking.
  Value get(std::string_view name, Value fallback = Value()) const;

  bool exposed() const noexcept;
  void set_exposure_hook(ExposureHook hook);

  Value::Map params_map() const;
  /// Canonical text of the parameters in assignment order.
  std::string to_text() const;

  friend bool operator==(const Assignment& a, const Assignment& b) {
    return a.params_ == b.params_ && a.in_experiment_ == b.in_experiment_ && a.ctx_ == b.ctx_;
  }

 private:
  struct ExposureState {
    std::atomic<bool> exposed{false};
    ExposureHook hook;
  };

  Params params_;
  SaltContext ctx_;
  bool in_experiment_ = true;
  std::shared_ptr<ExposureState> exposure_;
};

/// Runs the script top to bottom. Overridden names keep their frozen value:
/// assignments to them are skipped and reads see the override, for inputs
/// and parameters alike. Overridden parameters are always present in the
/// result.
///
/// `ctx` supplies the namespace and experiment; each random operator uses its
/// `salt` argument, or else the name being assigned, as the parameter salt.
Assignment evaluate(const ScriptIR& ir, const Inputs& inputs, const Overrides& overrides,
                    const SaltContext& ctx);

}  // namespace planout
