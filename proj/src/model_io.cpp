#include "ehsched/model_io.hpp"

#include <fstream>
#include <sstream>

namespace ehs {

using nlohmann::json;

namespace {

Vector to_vector(const json& arr, const char* what) {
  if (!arr.is_array() || arr.empty()) {
    throw ModelFileError(std::string(what) + " must be a nonempty array");
  }
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ModelFileError(std::string(what) + " must hold numbers");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

Matrix to_matrix(const json& rows, Eigen::Index n, const char* what) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != n) {
    throw ModelFileError(std::string(what) + " must have one row per state");
  }
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector row = to_vector(rows[static_cast<std::size_t>(i)], what);
    if (row.size() != n) throw ModelFileError(std::string(what) + " must be square");
    m.row(i) = row.transpose();
  }
  return m;
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

const json& require(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ModelFileError(std::string("missing section '") + key + "'");
  return doc.at(key);
}

}  // namespace

Problem problem_from_json(const json& doc) {
  try {
    if (doc.contains("schema_version") && doc.at("schema_version").get<int>() != kModelSchemaVersion) {
      throw ModelFileError("unsupported model schema version");
    }
    const json& h = require(doc, "harvest");
    const Vector states = to_vector(require(h, "states_mJ"), "harvest.states_mJ");
    const Matrix q = to_matrix(require(h, "transitions"), states.size(), "harvest.transitions");
    const double slot_s = h.value("slot_s", 1.0);
    HarvestModel harvest(states, q, slot_s);

    ChannelModel channel = ChannelModel::static_channel();
    if (doc.contains("channel")) {
      const json& c = doc.at("channel");
      const Vector gains = to_vector(require(c, "gains"), "channel.gains");
      const Matrix f = to_matrix(require(c, "transitions"), gains.size(), "channel.transitions");
      channel = ChannelModel(gains, f);
    }

    double bandwidth = kDefaultBandwidthHz;
    double noise_psd = kDefaultNoisePsd;
    if (doc.contains("rate")) {
      const json& r = doc.at("rate");
      if (r.value("form", std::string("shannon")) != "shannon") {
        throw ModelFileError("only the 'shannon' rate form is supported");
      }
      bandwidth = r.value("bandwidth_hz", bandwidth);
      noise_psd = r.value("noise_psd_w_per_hz", noise_psd);
    }

    const json& ps = require(doc, "power_set");
    const Vector levels = to_vector(require(ps, "levels_mW"), "power_set.levels_mW");
    const bool idle = ps.contains("idle") ? ps.at("idle").get<bool>() : !channel.is_static();
    PowerRateSet power_set(std::vector<double>(levels.data(), levels.data() + levels.size()),
                           RateFunction::shannon(bandwidth, noise_psd, slot_s), slot_s, idle);

    EnergyGrid grid;
    if (doc.contains("grid")) {
      const json& g = doc.at("grid");
      grid = EnergyGrid(g.value("quantum_mJ", 1.0), g.value("max_mJ", 4096.0));
    }
    return Problem(std::move(harvest), std::move(channel), std::move(power_set), grid);
  } catch (const json::exception& e) {
    throw ModelFileError(std::string("malformed model document: ") + e.what());
  }
}

json problem_to_json(const Problem& p) {
  const RateFunction& rate = p.power_set.rate();
  if (rate.form() != "shannon") {
    throw ModelFileError("cannot serialize rate form '" + rate.form() + "'");
  }
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["harvest"] = {{"states_mJ", vector_json(p.harvest.states())},
                    {"transitions", matrix_json(p.harvest.transitions())},
                    {"slot_s", p.slot_duration()}};
  doc["channel"] = {{"gains", vector_json(p.channel.gains())},
                    {"transitions", matrix_json(p.channel.transitions())}};
  doc["power_set"] = {{"levels_mW", p.power_set.levels_mw()},
                      {"idle", p.power_set.includes_idle()}};
  doc["grid"] = {{"quantum_mJ", p.grid.quantum()}, {"max_mJ", p.grid.max_energy()}};
  doc["rate"] = {{"form", "shannon"},
                 {"bandwidth_hz", rate.bandwidth_hz()},
                 {"noise_psd_w_per_hz", rate.noise_psd_w_per_hz()}};
  return doc;
}

Problem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelFileError("cannot open model file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ModelFileError("cannot parse model file " + path.string() + ": " + e.what());
  }
  return problem_from_json(doc);
}

void save_problem(const Problem& problem, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ModelFileError("cannot write model file " + path.string());
  out << problem_to_json(problem).dump(2) << '\n';
}

std::uint64_t problem_hash(const Problem& problem) {
  const std::string text = problem_to_json(problem).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Problem burst_problem(double max_mj) {
  const HarvestModel harvest = burst_harvest_model();
  PowerRateSet power_set(wifi_power_levels_mw(),
                         RateFunction::shannon(kDefaultBandwidthHz, kDefaultNoisePsd,
                                               harvest.slot_duration()),
                         harvest.slot_duration(), false);
  return Problem(harvest, ChannelModel::static_channel(), std::move(power_set),
                 EnergyGrid(1.0, max_mj));
}

}  // namespace ehs
