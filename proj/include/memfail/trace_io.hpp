#pragma once

// JSON forms of the trace model: one JSON object per event (JSON Lines) and
// a JSON array of DIMM metadata.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "memfail/trace_model.hpp"

namespace memfail {

nlohmann::json to_json(const DimmId& id);
DimmId dimm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CellAddress& cell);
CellAddress cell_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CeEvent& e);
nlohmann::json to_json(const UeEvent& e);
nlohmann::json to_json(const DimmMeta& m);
DimmMeta meta_from_json(const nlohmann::json& j);

// Writes CEs and UEs merged into one stream ordered by timestamp, then DIMM.
void write_trace_jsonl(std::ostream& os, std::span<const CeEvent> ces, std::span<const UeEvent> ues);
void write_trace_jsonl(std::ostream& os, const EventLog& log);

void write_meta_json(std::ostream& os, std::span<const DimmMeta> meta);
std::vector<DimmMeta> read_meta_json(std::istream& is);

std::vector<DimmMeta> meta_list(const ValidatedTrace& trace);

}  // namespace memfail
