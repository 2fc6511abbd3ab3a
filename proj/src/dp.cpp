#include "ehsched/dp.hpp"

#include <algorithm>
#include <cmath>

namespace ehs {

namespace {

/// Tolerance for treating two action values as tied.
double tie_tolerance(double reference) { return 1e-12 * std::max(1.0, std::abs(reference)); }

struct ActionSet {
  std::vector<int> codes;           // kIdle first if allowed, then levels
  std::vector<std::size_t> drains;  // in grid quanta
};

ActionSet make_actions(const PowerRateSet& set, const EnergyGrid& grid, bool idle) {
  ActionSet a;
  if (idle) {
    a.codes.push_back(kIdle);
    a.drains.push_back(0);
  }
  for (std::size_t l = 0; l < set.size(); ++l) {
    a.codes.push_back(static_cast<int>(l));
    a.drains.push_back(grid.index_of(set.drain(l)));
  }
  return a;
}

double action_bits(const PowerRateSet& set, double e, int code, double full_bits) {
  if (code == kIdle || e <= 0.0) return 0.0;
  const double d = set.drain(static_cast<std::size_t>(code));
  return full_bits * std::min(e / d, 1.0);
}

/// Fills one column of a layer: for every grid energy, the best action given
/// continuation values indexed by residual energy (may be null for n = 1).
void fill_column(const PowerRateSet& set, const EnergyGrid& grid, const ActionSet& actions,
                 double gamma, const double* continuation, double* values, int* decisions) {
  std::vector<double> full(actions.codes.size(), 0.0);
  for (std::size_t a = 0; a < actions.codes.size(); ++a) {
    if (actions.codes[a] != kIdle) {
      full[a] = set.full_slot_bits(set.drain(static_cast<std::size_t>(actions.codes[a])), gamma);
    }
  }
  for (std::size_t k = 0; k < grid.points(); ++k) {
    const double e = grid.energy(k);
    double best = 0.0;
    int best_code = kIdle;
    bool first = true;
    for (std::size_t a = 0; a < actions.codes.size(); ++a) {
      const std::size_t residual = k > actions.drains[a] ? k - actions.drains[a] : 0;
      double v = action_bits(set, e, actions.codes[a], full[a]);
      if (continuation != nullptr) v += continuation[residual];
      if (first || v > best + tie_tolerance(best)) {
        best = v;
        best_code = actions.codes[a];
        first = false;
      }
    }
    values[k] = best;
    decisions[k] = best_code;
  }
}

/// cont(m, h*|G| + u) = sum_j sum_v q_ij f_uv V(min(m + h_j, top), j, v).
Matrix continuation(const Problem& p, const Matrix& prev,
                    const std::vector<std::size_t>& harvest_idx) {
  const auto points = static_cast<Eigen::Index>(p.grid.points());
  const auto nh = static_cast<Eigen::Index>(p.harvest.size());
  const auto ng = static_cast<Eigen::Index>(p.channel.size());
  const Matrix& q = p.harvest.transitions();
  const Matrix ft = p.channel.transitions().transpose();
  Matrix cont = Matrix::Zero(points, nh * ng);
  Matrix shifted(points, ng);
  for (Eigen::Index j = 0; j < nh; ++j) {
    const auto hj = static_cast<Eigen::Index>(harvest_idx[static_cast<std::size_t>(j)]);
    for (Eigen::Index m = 0; m < points; ++m) {
      shifted.row(m) = prev.block(std::min(m + hj, points - 1), j * ng, 1, ng);
    }
    const Matrix mixed = shifted * ft;  // mixed(m, u) = sum_v f_uv V(., j, v)
    for (Eigen::Index i = 0; i < nh; ++i) {
      if (q(i, j) != 0.0) cont.middleCols(i * ng, ng) += q(i, j) * mixed;
    }
  }
  return cont;
}

std::vector<std::size_t> harvest_indices(const Problem& p) {
  std::vector<std::size_t> idx;
  for (Eigen::Index j = 0; j < p.harvest.states().size(); ++j) {
    idx.push_back(p.grid.index_of(p.harvest.states()(j)));
  }
  return idx;
}

}  // namespace

ValueTable::ValueTable(Problem problem, std::vector<Layer> layers,
                       std::uint64_t clamped_cells)
    : problem_(std::move(problem)), layers_(std::move(layers)), clamped_cells_(clamped_cells) {
  if (layers_.empty()) throw std::invalid_argument("value table needs at least one layer");
  const auto rows = static_cast<Eigen::Index>(problem_.grid.points());
  const auto cols = static_cast<Eigen::Index>(state_count());
  for (const Layer& l : layers_) {
    if (l.values.rows() != rows || l.values.cols() != cols || l.decisions.rows() != rows ||
        l.decisions.cols() != cols) {
      throw std::invalid_argument("layer shape does not match the problem");
    }
  }
}

Layer terminal_layer(const PowerRateSet& power_set, const EnergyGrid& grid, double gamma) {
  const ActionSet actions = make_actions(power_set, grid, power_set.includes_idle());
  const auto points = static_cast<Eigen::Index>(grid.points());
  Layer layer{Matrix(points, 1), DecisionMatrix(points, 1)};
  fill_column(power_set, grid, actions, gamma, nullptr, layer.values.data(),
              layer.decisions.data());
  return layer;
}

ValueTable backward_induct(const Problem& p, int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least one slot");
  const ActionSet actions = make_actions(p.power_set, p.grid, p.idle_allowed());
  const std::vector<std::size_t> hidx = harvest_indices(p);
  const auto points = static_cast<Eigen::Index>(p.grid.points());
  const auto nh = static_cast<Eigen::Index>(p.harvest.size());
  const auto ng = static_cast<Eigen::Index>(p.channel.size());
  const std::size_t top = p.grid.points() - 1;

  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(horizon));
  std::uint64_t clamped = 0;

  for (int n = 1; n <= horizon; ++n) {
    Layer layer{Matrix(points, nh * ng), DecisionMatrix(points, nh * ng)};
    Matrix cont;
    if (n > 1) cont = continuation(p, layers.back().values, hidx);
    for (Eigen::Index i = 0; i < nh; ++i) {
      for (Eigen::Index u = 0; u < ng; ++u) {
        const Eigen::Index col = i * ng + u;
        fill_column(p.power_set, p.grid, actions, p.channel.gains()(u),
                    n > 1 ? cont.col(col).data() : nullptr, layer.values.col(col).data(),
                    layer.decisions.col(col).data());
        if (n == 1) continue;
        std::size_t max_next_harvest = 0;
        for (Eigen::Index j = 0; j < nh; ++j) {
          if (p.harvest.transitions()(i, j) > 0.0) {
            max_next_harvest = std::max(max_next_harvest, hidx[static_cast<std::size_t>(j)]);
          }
        }
        for (Eigen::Index k = 0; k < points; ++k) {
          const int code = layer.decisions(k, col);
          const std::size_t d =
              code == kIdle ? 0 : p.grid.index_of(p.power_set.drain(static_cast<std::size_t>(code)));
          const std::size_t residual = static_cast<std::size_t>(k) > d ? static_cast<std::size_t>(k) - d : 0;
          if (residual + max_next_harvest > top) ++clamped;
        }
      }
    }
    layers.push_back(std::move(layer));
  }
  return ValueTable(p, std::move(layers), clamped);
}

std::vector<double> action_values(const ValueTable& table, int n, std::size_t e_index,
                                  std::size_t h, std::size_t u) {
  const Problem& p = table.problem();
  const ActionSet actions = make_actions(p.power_set, p.grid, p.idle_allowed());
  const double gamma = p.channel.gains()(static_cast<Eigen::Index>(u));
  const double e = p.grid.energy(e_index);
  const auto col = static_cast<Eigen::Index>(table.state_index(h, u));
  Matrix cont;
  if (n > 1) cont = continuation(p, table.layer(n - 1).values, harvest_indices(p));
  std::vector<double> out;
  for (std::size_t a = 0; a < actions.codes.size(); ++a) {
    const int code = actions.codes[a];
    const double full =
        code == kIdle ? 0.0 : p.power_set.full_slot_bits(p.power_set.drain(static_cast<std::size_t>(code)), gamma);
    double v = action_bits(p.power_set, e, code, full);
    if (n > 1) {
      const std::size_t residual = e_index > actions.drains[a] ? e_index - actions.drains[a] : 0;
      v += cont(static_cast<Eigen::Index>(residual), col);
    }
    out.push_back(v);
  }
  return out;
}

StructureReport check_structure(const ValueTable& table) {
  const Problem& p = table.problem();
  const ActionSet actions = make_actions(p.power_set, p.grid, p.idle_allowed());
  const std::vector<std::size_t> hidx = harvest_indices(p);
  const std::size_t points = p.grid.points();
  const std::size_t nh = p.harvest.size();
  const std::size_t ng = p.channel.size();
  const std::size_t first_level = p.idle_allowed() ? 1 : 0;
  const std::size_t na = actions.codes.size();
  const int top_level = static_cast<int>(p.power_set.size()) - 1;
  const double rho_min = p.power_set.min_drain();
  const double rho_max = p.power_set.max_drain();

  StructureReport report;
  report.theorem1_checked = p.channel.is_static() && !p.idle_allowed();
  report.grid_cells = static_cast<std::uint64_t>(table.horizon()) * points * nh * ng;

  std::vector<double> q(points * na);  // q[k * na + a]
  for (int n = 1; n <= table.horizon(); ++n) {
    const Layer& layer = table.layer(n);
    Matrix cont;
    if (n > 1) cont = continuation(p, table.layer(n - 1).values, hidx);
    for (std::size_t h = 0; h < nh; ++h) {
      for (std::size_t u = 0; u < ng; ++u) {
        const auto col = static_cast<Eigen::Index>(table.state_index(h, u));
        const double gamma = p.channel.gains()(static_cast<Eigen::Index>(u));
        std::vector<double> full(na, 0.0);
        for (std::size_t a = first_level; a < na; ++a) {
          full[a] = p.power_set.full_slot_bits(p.power_set.drain(static_cast<std::size_t>(actions.codes[a])), gamma);
        }
        for (std::size_t k = 0; k < points; ++k) {
          const double e = p.grid.energy(k);
          for (std::size_t a = 0; a < na; ++a) {
            const std::size_t residual = k > actions.drains[a] ? k - actions.drains[a] : 0;
            double v = action_bits(p.power_set, e, actions.codes[a], full[a]);
            if (n > 1) v += cont(static_cast<Eigen::Index>(residual), col);
            q[k * na + a] = v;
          }
        }

        int prev_decision = layer.decisions(0, col);
        for (std::size_t k = 0; k < points; ++k) {
          const double e = p.grid.energy(k);
          const int d = layer.decisions(static_cast<Eigen::Index>(k), col);
          const CellRef cell{n, h, u, e};
          if (report.theorem1_checked && e > 0.0 && e < rho_min && d != 0) {
            report.theorem1_violations.push_back({cell, 0, d});
          }
          if (k > 0 && d < prev_decision) {
            report.threshold_violations.push_back({cell, prev_decision, d});
          }
          prev_decision = d;
          if (e > static_cast<double>(n) * rho_max && d != top_level) {
            report.lemma_violations.push_back({cell, top_level, d});
          }
        }

        // Pairwise checks over nonzero levels.
        for (std::size_t hi = first_level; hi < na; ++hi) {
          const double g_hi = full[hi];
          const double rho_hi = p.power_set.drain(static_cast<std::size_t>(actions.codes[hi]));
          for (std::size_t lo = first_level; lo < hi; ++lo) {
            const double bound = full[lo] / g_hi * rho_hi;
            bool preferred_high = false;
            for (std::size_t k = 0; k < points; ++k) {
              const double vh = q[k * na + hi];
              const double vl = q[k * na + lo];
              const double tol = 1e-10 * std::max(1.0, std::max(std::abs(vh), std::abs(vl)));
              const CellRef cell{n, h, u, p.grid.energy(k)};
              if (p.grid.energy(k) <= bound && vh > vl + tol) {
                report.lemma_violations.push_back({cell, actions.codes[hi], actions.codes[lo]});
              }
              if (vh > vl + tol) {
                preferred_high = true;
              } else if (vh < vl - tol && preferred_high) {
                report.assumption1_violations.push_back(
                    {cell, actions.codes[hi], actions.codes[lo]});
                preferred_high = false;
              }
            }
          }
        }
      }
    }
  }
  report.theorem1_ok = report.theorem1_violations.empty();
  report.threshold_ok = report.threshold_violations.empty();
  report.assumption1_ok = report.assumption1_violations.empty();
  report.lemma_bounds_ok = report.lemma_violations.empty();
  return report;
}

namespace {

nlohmann::json cell_json(const CellRef& c) {
  return {{"n", c.n}, {"harvest_state", c.harvest_state}, {"channel_state", c.channel_state},
          {"energy_mJ", c.energy}};
}

template <typename V>
nlohmann::json violations_json(const std::vector<V>& list, std::size_t cap) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < list.size() && i < cap; ++i) {
    nlohmann::json item = cell_json(list[i].cell);
    if constexpr (std::is_same_v<V, DecisionViolation>) {
      item["expected"] = list[i].expected;
      item["actual"] = list[i].actual;
    } else {
      item["higher"] = list[i].higher;
      item["lower"] = list[i].lower;
    }
    arr.push_back(item);
  }
  return arr;
}

}  // namespace

nlohmann::json report_to_json(const StructureReport& r) {
  constexpr std::size_t cap = 1000;
  return {
      {"schema_version", 1},
      {"grid_cells", r.grid_cells},
      {"theorem1_checked", r.theorem1_checked},
      {"theorem1_ok", r.theorem1_ok},
      {"theorem1_violation_count", r.theorem1_violations.size()},
      {"theorem1_violations", violations_json(r.theorem1_violations, cap)},
      {"threshold_ok", r.threshold_ok},
      {"threshold_violation_count", r.threshold_violations.size()},
      {"threshold_violations", violations_json(r.threshold_violations, cap)},
      {"assumption1_ok", r.assumption1_ok},
      {"assumption1_violation_count", r.assumption1_violations.size()},
      {"assumption1_violations", violations_json(r.assumption1_violations, cap)},
      {"lemma_bounds_ok", r.lemma_bounds_ok},
      {"lemma_violation_count", r.lemma_violations.size()},
      {"lemma_violations", violations_json(r.lemma_violations, cap)},
  };
}

}  // namespace ehs
