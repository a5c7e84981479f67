#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gradtrace/turing.hpp"

namespace gradtrace {

/// Layout hints carried by a machine file: which tapes hold payload marks and
/// data and where computed output lands (1-based tape ids, cell index of the
/// first output cell).
struct MachineIo {
  std::optional<int> mark_tape;
  std::optional<int> data_tape;
  int output_tape = 0;
  int output_start = 1;
};

struct MachineFile {
  std::string name;
  TuringMachine machine;
  MachineIo io;
};

MachineFile load_machine(const std::string& path);
MachineFile parse_machine(const std::string& json_text);

/// One tracer/simulator input: per-tape payloads (1-based ids, bits) plus the
/// tape bound to run under.
struct MachineInput {
  std::vector<std::pair<int, std::vector<int>>> payloads;
  int tau = 0;
};

struct CorpusEntry {
  std::string path;
  MachineFile file;
  std::vector<MachineInput> inputs;
};

/// Loads a corpus manifest ({"machines": [{"path", "inputs": [...]}, ...]});
/// machine paths are resolved relative to the manifest.
std::vector<CorpusEntry> load_corpus(const std::string& manifest_path);

/// JSON-lines trace export, one configuration per line.
std::string trace_to_jsonl(const TuringMachine& tm, const ExecutionTrace& t);

}  // namespace gradtrace
