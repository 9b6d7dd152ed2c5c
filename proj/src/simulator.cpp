#include "planout/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "planout/error.hpp"

namespace planout {

using nlohmann::json;

namespace {

std::uint64_t total_units(const std::vector<UnitAxis>& axes) {
  if (axes.empty()) throw Error(ErrorCode::InvalidArgument, "simulation needs at least one unit axis");
  std::uint64_t n = 1;
  for (const auto& a : axes) {
    if (a.name.empty()) throw Error(ErrorCode::InvalidArgument, "unit axis needs a name");
    if (a.count < 1) throw Error(ErrorCode::InvalidArgument, "unit axis '" + a.name + "' needs n >= 1");
    if (n > UINT64_MAX / static_cast<std::uint64_t>(a.count)) {
      throw Error(ErrorCode::InvalidArgument, "unit grid is too large");
    }
    n *= static_cast<std::uint64_t>(a.count);
  }
  return n;
}

Value axis_value(const UnitAxis& axis, std::int64_t i, bool hashed) {
  if (!hashed) return Value(i);
  return Value("id" + sha1_hex(axis.name + ":" + std::to_string(i)).substr(0, 16));
}

std::string cell_of(const Value* v) { return v ? canonical_text(*v) : std::string(kUnsetCell); }

struct Worker {
  const ScriptIR& ir;
  const SimulationOptions& opts;
  const std::vector<std::string>& params;
  const std::vector<std::pair<std::string, std::string>>& pairs;

  SimulationReport run(std::uint64_t begin, std::uint64_t end) const {
    SimulationReport r;
    std::vector<std::string> cells(params.size());
    for (std::uint64_t idx = begin; idx < end; ++idx) {
      Inputs in = opts.fixed_inputs;
      std::uint64_t rest = idx;
      for (std::size_t k = opts.axes.size(); k-- > 0;) {
        auto count = static_cast<std::uint64_t>(opts.axes[k].count);
        in[opts.axes[k].name] = axis_value(opts.axes[k], static_cast<std::int64_t>(rest % count), opts.hashed_ids);
        rest /= count;
      }
      if (opts.extra_inputs) opts.extra_inputs(idx, in);
      Assignment a = [&] {
        try {
          return evaluate(ir, in, opts.overrides, opts.context);
        } catch (const Error& e) {
          throw Error(e.code(), std::string(e.what()) + " (unit " + canonical_text(in) + ")", e.offset());
        }
      }();
      ++r.n;
      if (a.in_experiment()) ++r.in_experiment;
      for (std::size_t p = 0; p < params.size(); ++p) {
        cells[p] = cell_of(a.find(params[p]));
        ++r.marginals[params[p]][cells[p]];
      }
      for (const auto& [pa, pb] : pairs) {
        auto ia = static_cast<std::size_t>(std::find(params.begin(), params.end(), pa) - params.begin());
        auto ib = static_cast<std::size_t>(std::find(params.begin(), params.end(), pb) - params.begin());
        ++r.joints[{pa, pb}][{cells[ia], cells[ib]}];
      }
    }
    return r;
  }
};

const CellCounts& marginal(const SimulationReport& r, const std::string& p) {
  auto it = r.marginals.find(p);
  if (it == r.marginals.end()) throw Error(ErrorCode::UnknownParameter, "unknown parameter '" + p + "'");
  return it->second;
}

const JointCounts& joint(const SimulationReport& r, const std::string& a, const std::string& b, bool& swapped) {
  marginal(r, a);
  marginal(r, b);
  swapped = false;
  if (auto it = r.joints.find({a, b}); it != r.joints.end()) return it->second;
  if (auto it = r.joints.find({b, a}); it != r.joints.end()) {
    swapped = true;
    return it->second;
  }
  throw Error(ErrorCode::InvalidArgument, "parameters '" + a + "' and '" + b + "' were not cross-tabulated");
}

double ratio(std::uint64_t count, std::uint64_t n) {
  return n == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(n);
}

}  // namespace

double SimulationReport::frequency(const std::string& param, const std::string& cell) const {
  const auto& m = marginal(*this, param);
  auto it = m.find(cell);
  return it == m.end() ? 0.0 : ratio(it->second, n);
}

std::map<std::string, std::map<std::string, double>> SimulationReport::conditional(const std::string& a,
                                                                                   const std::string& b) const {
  bool swapped = false;
  const JointCounts& j = joint(*this, a, b, swapped);
  const CellCounts& mb = marginal(*this, b);
  std::map<std::string, std::map<std::string, double>> out;
  for (const auto& [cells, count] : j) {
    const std::string& ca = swapped ? cells.second : cells.first;
    const std::string& cb = swapped ? cells.first : cells.second;
    out[cb][ca] = ratio(count, mb.at(cb));
  }
  return out;
}

void SimulationReport::merge(const SimulationReport& other) {
  n += other.n;
  in_experiment += other.in_experiment;
  for (const auto& [p, cells] : other.marginals) {
    auto& mine = marginals[p];
    for (const auto& [c, k] : cells) mine[c] += k;
  }
  for (const auto& [pair, cells] : other.joints) {
    auto& mine = joints[pair];
    for (const auto& [c, k] : cells) mine[c] += k;
  }
}

SimulationReport simulate(const ScriptIR& ir, const SimulationOptions& options) {
  std::uint64_t n = total_units(options.axes);
  std::vector<std::string> params = list_parameters(ir);
  for (const auto& [name, _] : options.overrides) {
    if (std::find(params.begin(), params.end(), name) == params.end()) params.push_back(name);
  }
  std::vector<std::pair<std::string, std::string>> pairs = options.pairs;
  if (pairs.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = i + 1; j < params.size(); ++j) pairs.emplace_back(params[i], params[j]);
    }
  }
  for (const auto& [a, b] : pairs) {
    for (const auto& p : {a, b}) {
      if (std::find(params.begin(), params.end(), p) == params.end()) {
        throw Error(ErrorCode::UnknownParameter, "script does not set parameter '" + p + "'");
      }
    }
  }

  Worker worker{ir, options, params, pairs};
  int jobs = std::clamp(options.jobs, 1, 256);
  if (jobs == 1 || n < 2 * static_cast<std::uint64_t>(jobs)) return worker.run(0, n);

  std::vector<SimulationReport> parts(static_cast<std::size_t>(jobs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) {
    std::uint64_t begin = n * static_cast<std::uint64_t>(t) / static_cast<std::uint64_t>(jobs);
    std::uint64_t end = n * static_cast<std::uint64_t>(t + 1) / static_cast<std::uint64_t>(jobs);
    threads.emplace_back([&, t, begin, end] {
      try {
        parts[static_cast<std::size_t>(t)] = worker.run(begin, end);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SimulationReport report;
  for (const auto& part : parts) report.merge(part);
  return report;
}

ChiSquare chi_square(const std::vector<std::uint64_t>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw Error(ErrorCode::InvalidArgument, "observed and expected need the same, nonzero, number of cells");
  }
  double total_p = 0.0;
  std::uint64_t n = 0;
  for (double p : expected) {
    if (p < 0) throw Error(ErrorCode::InvalidArgument, "expected probabilities must be non-negative");
    total_p += p;
  }
  if (std::abs(total_p - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "expected probabilities must sum to 1");
  for (auto o : observed) n += o;
  ChiSquare out;
  out.dof = static_cast<int>(observed.size()) - 1;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    double e = expected[i] * static_cast<double>(n);
    if (e < 5.0) {
      throw Error(ErrorCode::ExpectedTooSmall,
                  "expected count " + std::to_string(e) + " in cell " + std::to_string(i) + " is below 5");
    }
    double d = static_cast<double>(observed[i]) - e;
    out.statistic += d * d / e;
  }
  return out;
}

std::optional<ChiSquare> independence_chi_square(const SimulationReport& report, const std::string& a,
                                                 const std::string& b) {
  bool swapped = false;
  const JointCounts& j = joint(report, a, b, swapped);
  const CellCounts& ma = marginal(report, a);
  const CellCounts& mb = marginal(report, b);
  if (ma.size() < 2 || mb.size() < 2 || report.n == 0) return std::nullopt;
  ChiSquare out;
  out.dof = static_cast<int>((ma.size() - 1) * (mb.size() - 1));
  auto nn = static_cast<double>(report.n);
  for (const auto& [ca, ka] : ma) {
    for (const auto& [cb, kb] : mb) {
      double e = static_cast<double>(ka) * static_cast<double>(kb) / nn;
      if (e < 5.0) return std::nullopt;
      auto it = j.find(swapped ? std::make_pair(cb, ca) : std::make_pair(ca, cb));
      double o = it == j.end() ? 0.0 : static_cast<double>(it->second);
      out.statistic += (o - e) * (o - e) / e;
    }
  }
  return out;
}

double independence_table(const SimulationReport& report, const std::string& a, const std::string& b) {
  bool swapped = false;
  const JointCounts& j = joint(report, a, b, swapped);
  const CellCounts& ma = marginal(report, a);
  const CellCounts& mb = marginal(report, b);
  double worst = 0.0;
  for (const auto& [ca, ka] : ma) {
    for (const auto& [cb, kb] : mb) {
      auto it = j.find(swapped ? std::make_pair(cb, ca) : std::make_pair(ca, cb));
      double pab = it == j.end() ? 0.0 : ratio(it->second, report.n);
      worst = std::max(worst, std::abs(pab - ratio(ka, report.n) * ratio(kb, report.n)));
    }
  }
  return worst;
}

std::string report_json(const SimulationReport& report) {
  json params = json::object();
  for (const auto& [p, cells] : report.marginals) {
    json cj = json::object();
    for (const auto& [c, k] : cells) cj[c] = {{"count", k}, {"frequency", ratio(k, report.n)}};
    params[p] = std::move(cj);
  }
  json joints = json::array();
  for (const auto& [pair, cells] : report.joints) {
    json cj = json::array();
    for (const auto& [c, k] : cells) {
      cj.push_back({{"values", {c.first, c.second}}, {"count", k}, {"frequency", ratio(k, report.n)}});
    }
    json chi = nullptr;
    if (auto x = independence_chi_square(report, pair.first, pair.second)) {
      chi = {{"statistic", x->statistic}, {"dof", x->dof}};
    }
    json cond = json::object();
    for (const auto& [cb, row] : report.conditional(pair.first, pair.second)) cond[cb] = row;
    joints.push_back({{"params", {pair.first, pair.second}},
                      {"cells", std::move(cj)},
                      {"chi_square", std::move(chi)},
                      {"max_dependence", independence_table(report, pair.first, pair.second)},
                      {"conditional", std::move(cond)}});
  }
  return json{{"n", report.n},
              {"in_experiment", report.in_experiment},
              {"parameters", std::move(params)},
              {"joint", std::move(joints)}}
      .dump();
}

std::string report_table(const SimulationReport& report) {
  std::vector<std::vector<std::string>> rows;
  auto freq = [&](std::uint64_t k) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << ratio(k, report.n);
    return s.str();
  };
  auto emit = [&](const std::vector<std::vector<std::string>>& table, std::ostringstream& out) {
    std::vector<std::size_t> width;
    for (const auto& row : table) {
      width.resize(std::max(width.size(), row.size()));
      for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    for (const auto& row : table) {
      std::string line;
      for (std::size_t i = 0; i < row.size(); ++i) {
        bool numeric = i + 2 >= row.size();
        std::string pad(width[i] - row[i].size(), ' ');
        line += numeric ? pad + row[i] : row[i] + pad;
        if (i + 1 < row.size()) line += "  ";
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out << line << '\n';
    }
  };

  std::ostringstream out;
  out << "units: " << report.n << "  in experiment: " << report.in_experiment << "\n\n";
  std::vector<std::vector<std::string>> table{{"parameter", "value", "count", "frequency"}};
  for (const auto& [p, cells] : report.marginals) {
    for (const auto& [c, k] : cells) table.push_back({p, c, std::to_string(k), freq(k)});
  }
  emit(table, out);
  for (const auto& [pair, cells] : report.joints) {
    out << '\n' << pair.first << " x " << pair.second;
    if (auto x = independence_chi_square(report, pair.first, pair.second)) {
      out << "  (chi-square " << std::fixed << std::setprecision(2) << x->statistic << ", dof " << x->dof << ")";
    }
    out << '\n';
    std::vector<std::vector<std::string>> jt{{pair.first, pair.second, "count", "frequency"}};
    for (const auto& [c, k] : cells) jt.push_back({c.first, c.second, std::to_string(k), freq(k)});
    emit(jt, out);
  }
  return out.str();
}

}  // namespace planout
