#include "memfail/trace_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <tuple>

#include "memfail/ingest.hpp"

namespace memfail {

using nlohmann::json;

json to_json(const DimmId& id) {
  return {{"server", id.server_id}, {"socket", id.socket}, {"channel", id.channel}, {"slot", id.slot}};
}

DimmId dimm_from_json(const json& j) {
  DimmId id;
  id.server_id = j.at("server").get<std::string>();
  id.socket = j.at("socket").get<int>();
  id.channel = j.at("channel").get<int>();
  id.slot = j.at("slot").get<int>();
  if (id.socket < 0 || id.channel < 0 || id.slot < 0) {
    throw Error(ErrorCode::malformed_record, "negative DIMM coordinate");
  }
  return id;
}

json to_json(const CellAddress& c) {
  return {{"rank", c.rank}, {"device", c.device}, {"bank_group", c.bank_group},
          {"bank", c.bank},  {"row", c.row},       {"column", c.column}};
}

CellAddress cell_from_json(const json& j) {
  CellAddress c;
  c.rank = j.at("rank").get<int>();
  c.device = j.at("device").get<int>();
  c.bank_group = j.at("bank_group").get<int>();
  c.bank = j.at("bank").get<int>();
  c.row = j.at("row").get<std::int64_t>();
  c.column = j.at("column").get<std::int64_t>();
  if (c.rank < 0 || c.device < 0 || c.bank_group < 0 || c.bank < 0 || c.row < 0 || c.column < 0) {
    throw Error(ErrorCode::malformed_record, "negative cell coordinate");
  }
  return c;
}

json to_json(const CeEvent& e) {
  return {{"kind", "ce"},
          {"ts", epoch_ms(e.timestamp)},
          {"dimm", to_json(e.dimm)},
          {"cell", to_json(e.cell)},
          {"bitmap", encode_bitmap(e.bitmap)},
          {"count", e.count}};
}

json to_json(const UeEvent& e) {
  json j = {{"kind", "ue"}, {"ts", epoch_ms(e.timestamp)}, {"dimm", to_json(e.dimm)}, {"sudden", e.sudden}};
  if (e.cell) j["cell"] = to_json(*e.cell);
  return j;
}

json to_json(const DimmMeta& m) {
  return {{"dimm", to_json(m.dimm)},
          {"manufacturer", m.manufacturer},
          {"data_width", std::string(to_string(m.data_width))},
          {"frequency", m.frequency},
          {"chip_process", m.chip_process},
          {"platform", std::string(to_string(m.platform))}};
}

DimmMeta meta_from_json(const json& j) {
  DimmMeta m;
  m.dimm = dimm_from_json(j.at("dimm"));
  m.manufacturer = j.at("manufacturer").get<std::string>();
  const auto width = parse_data_width(j.at("data_width").get<std::string>());
  if (!width) throw Error(ErrorCode::malformed_record, "data_width must be x4 or x8");
  m.data_width = *width;
  m.frequency = j.at("frequency").get<int>();
  m.chip_process = j.value("chip_process", std::string{});
  const auto platform = parse_platform(j.value("platform", std::string{"custom"}));
  if (!platform) throw Error(ErrorCode::malformed_record, "unknown platform");
  m.platform = *platform;
  return m;
}

void write_trace_jsonl(std::ostream& os, std::span<const CeEvent> ces, std::span<const UeEvent> ues) {
  // Merge by (timestamp, dimm); CEs before UEs at equal keys.
  std::vector<const CeEvent*> c;
  c.reserve(ces.size());
  for (const auto& e : ces) c.push_back(&e);
  std::vector<const UeEvent*> u;
  u.reserve(ues.size());
  for (const auto& e : ues) u.push_back(&e);
  std::stable_sort(c.begin(), c.end(), [](const CeEvent* a, const CeEvent* b) {
    return std::tie(a->timestamp, a->dimm) < std::tie(b->timestamp, b->dimm);
  });
  std::stable_sort(u.begin(), u.end(), [](const UeEvent* a, const UeEvent* b) {
    return std::tie(a->timestamp, a->dimm) < std::tie(b->timestamp, b->dimm);
  });
  std::size_t i = 0;
  std::size_t k = 0;
  while (i < c.size() || k < u.size()) {
    const bool take_ce =
        k == u.size() ||
        (i < c.size() && std::tie(c[i]->timestamp, c[i]->dimm) <= std::tie(u[k]->timestamp, u[k]->dimm));
    if (take_ce) {
      os << to_json(*c[i++]).dump() << '\n';
    } else {
      os << to_json(*u[k++]).dump() << '\n';
    }
  }
}

void write_trace_jsonl(std::ostream& os, const EventLog& log) { write_trace_jsonl(os, log.ces, log.ues); }

void write_meta_json(std::ostream& os, std::span<const DimmMeta> meta) {
  json arr = json::array();
  for (const auto& m : meta) arr.push_back(to_json(m));
  os << arr.dump(1) << '\n';
}

std::vector<DimmMeta> read_meta_json(std::istream& is) {
  json arr;
  try {
    arr = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_record, std::string("meta file: ") + e.what());
  }
  if (!arr.is_array()) throw Error(ErrorCode::malformed_record, "meta file must hold a JSON array");
  std::vector<DimmMeta> out;
  out.reserve(arr.size());
  try {
    for (const auto& j : arr) out.push_back(meta_from_json(j));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::malformed_record, std::string("meta entry: ") + e.what());
  }
  return out;
}

std::vector<DimmMeta> meta_list(const ValidatedTrace& trace) {
  std::vector<DimmMeta> out;
  out.reserve(trace.meta().size());
  for (const auto& [id, m] : trace.meta()) out.push_back(m);
  return out;
}

}  // namespace memfail
