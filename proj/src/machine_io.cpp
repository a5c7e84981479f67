#include "gradtrace/machine_io.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace gradtrace {

using nlohmann::json;

namespace {

Eigen::VectorXi to_symbols(const json& arr, int d, const char* what) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != d)
    throw std::invalid_argument(std::string(what) + " must list one entry per tape");
  Eigen::VectorXi v(d);
  for (int i = 0; i < d; ++i) {
    const int x = arr[i].get<int>();
    if (x != 1 && x != -1)
      throw std::invalid_argument(std::string(what) + " entries must be +-1");
    v[i] = x;
  }
  return v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

MachineFile parse_machine(const std::string& json_text) {
  const json j = json::parse(json_text);

  std::vector<std::string> names = j.at("states").get<std::vector<std::string>>();
  std::map<std::string, int> index;
  for (size_t i = 0; i < names.size(); ++i) {
    if (!index.emplace(names[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate state name '" + names[i] + "'");
  }
  auto state_id = [&](const std::string& s) {
    auto it = index.find(s);
    if (it == index.end())
      throw std::invalid_argument("unknown state '" + s + "'");
    return it->second;
  };

  const int d = j.at("tapes").get<int>();
  std::vector<int> accepting;
  for (const auto& s : j.at("accepting")) accepting.push_back(state_id(s));
  std::vector<int> read_only;
  for (const auto& t : j.at("read_only")) {
    const int id = t.get<int>();
    if (id < 1 || id > d)
      throw std::invalid_argument("read_only tape ids are 1-based in [1,d]");
    read_only.push_back(id - 1);
  }

  MachineFile out{j.value("name", std::string("machine")),
                  TuringMachine(names, state_id(j.at("initial")), accepting, d,
                                read_only),
                  {}};

  for (const auto& row : j.at("delta")) {
    Transition t;
    t.next_state = state_id(row.at("to"));
    t.write = to_symbols(row.at("write"), d, "write");
    t.move = to_symbols(row.at("move"), d, "move");
    out.machine.set_transition(state_id(row.at("from")),
                               to_symbols(row.at("read"), d, "read"),
                               std::move(t));
  }
  out.machine.finalize();

  if (j.contains("io")) {
    const json& io = j.at("io");
    if (io.contains("mark_tape") && !io.at("mark_tape").is_null())
      out.io.mark_tape = io.at("mark_tape").get<int>();
    if (io.contains("data_tape") && !io.at("data_tape").is_null())
      out.io.data_tape = io.at("data_tape").get<int>();
    out.io.output_tape = io.value("output_tape", 0);
    out.io.output_start = io.value("output_start", 1);
  }
  return out;
}

MachineFile load_machine(const std::string& path) {
  try {
    return parse_machine(slurp(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<CorpusEntry> load_corpus(const std::string& manifest_path) {
  const json j = json::parse(slurp(manifest_path));
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::vector<CorpusEntry> out;
  for (const auto& m : j.at("machines")) {
    CorpusEntry e{m.at("path").get<std::string>(),
                  load_machine((base / m.at("path").get<std::string>()).string()),
                  {}};
    for (const auto& in : m.at("inputs")) {
      MachineInput mi;
      mi.tau = in.at("tau").get<int>();
      for (const auto& [tape, bits] : in.at("payloads").items())
        mi.payloads.emplace_back(std::stoi(tape), bits.get<std::vector<int>>());
      e.inputs.push_back(std::move(mi));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string trace_to_jsonl(const TuringMachine& tm, const ExecutionTrace& t) {
  std::ostringstream os;
  for (size_t k = 0; k < t.configs.size(); ++k) {
    const Configuration& c = t.configs[k];
    json line;
    line["step"] = k;
    line["state"] = tm.state_names()[c.state];
    line["heads"] = std::vector<int>(c.heads.data(), c.heads.data() + c.heads.size());
    std::vector<std::vector<int>> tapes(c.tapes.cols());
    for (int i = 0; i < c.tapes.cols(); ++i)
      for (int r = 0; r < c.tapes.rows(); ++r) tapes[i].push_back(c.tapes(r, i));
    line["tapes"] = tapes;
    os << line.dump() << "\n";
  }
  return os.str();
}

}  // namespace gradtrace
