#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ehsched/dp.hpp"
#include "ehsched/model_io.hpp"

namespace ehs {

namespace {

constexpr char kMagic[8] = {'E', 'H', 'S', 'D', 'P', 'T', 'B', 'L'};

static_assert(std::endian::native == std::endian::little,
              "table dump assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
}

template <typename T>
void read_raw(std::istream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
  if (!in) throw TableFormatError("truncated value table");
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

void save_table(const ValueTable& table, const std::filesystem::path& path) {
  const Problem& p = table.problem();
  nlohmann::json header = {
      {"format_version", kTableFormatVersion},
      {"horizon", table.horizon()},
      {"grid_points", p.grid.points()},
      {"harvest_states", p.harvest.size()},
      {"channel_states", p.channel.size()},
      {"clamped_cells", table.clamped_cells()},
      {"problem_hash", hex(problem_hash(p))},
      {"model", problem_to_json(p)},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TableFormatError("cannot write table file " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kTableFormatVersion;
  const auto length = static_cast<std::uint32_t>(text.size());
  write_raw(out, &version, 1);
  write_raw(out, &length, 1);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (int n = 1; n <= table.horizon(); ++n) {
    const Layer& l = table.layer(n);
    write_raw(out, l.values.data(), static_cast<std::size_t>(l.values.size()));
    write_raw(out, l.decisions.data(), static_cast<std::size_t>(l.decisions.size()));
  }
  if (!out) throw TableFormatError("failed writing table file " + path.string());
}

ValueTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TableFormatError("cannot open table file " + path.string());
  char magic[8];
  read_raw(in, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw TableFormatError("not a value table file");
  std::uint32_t version = 0;
  std::uint32_t length = 0;
  read_raw(in, &version, 1);
  if (version != kTableFormatVersion) throw TableFormatError("unsupported table format version");
  read_raw(in, &length, 1);
  std::string text(length, '\0');
  read_raw(in, text.data(), length);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw TableFormatError(std::string("corrupt table header: ") + e.what());
  }
  Problem problem = problem_from_json(header.at("model"));
  if (hex(problem_hash(problem)) != header.at("problem_hash").get<std::string>()) {
    throw TableFormatError("table header hash does not match its embedded model");
  }
  const int horizon = header.at("horizon").get<int>();
  const auto rows = static_cast<Eigen::Index>(problem.grid.points());
  const auto cols = static_cast<Eigen::Index>(problem.harvest.size() * problem.channel.size());
  if (header.at("grid_points").get<Eigen::Index>() != rows) {
    throw TableFormatError("grid size in header does not match the model");
  }
  std::vector<Layer> layers;
  for (int n = 1; n <= horizon; ++n) {
    Layer l{Matrix(rows, cols), DecisionMatrix(rows, cols)};
    read_raw(in, l.values.data(), static_cast<std::size_t>(l.values.size()));
    read_raw(in, l.decisions.data(), static_cast<std::size_t>(l.decisions.size()));
    layers.push_back(std::move(l));
  }
  return ValueTable(std::move(problem), std::move(layers),
                    header.at("clamped_cells").get<std::uint64_t>());
}

}  // namespace ehs
