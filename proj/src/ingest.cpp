#include "memfail/ingest.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "memfail/trace_io.hpp"

namespace memfail {

using nlohmann::json;

std::uint64_t parse_hex_word(std::string_view hex) {
  if (hex.size() != 16) {
    throw Error(ErrorCode::malformed_hex, fmt::format("expected 16 hex digits, got {}", hex.size()));
  }
  std::uint64_t word = 0;
  for (char ch : hex) {
    int v;
    if (ch >= '0' && ch <= '9') {
      v = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      v = ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      v = ch - 'A' + 10;
    } else {
      throw Error(ErrorCode::malformed_hex, "non-hex digit in bitmap");
    }
    word = (word << 4) | static_cast<std::uint64_t>(v);
  }
  return word;
}

ErrorBitmap decode_bitmap(std::string_view hex, DataWidth width) {
  const auto bitmap = ErrorBitmap::from_word(parse_hex_word(hex));
  if (!bitmap.fits_width(dq_width(width))) {
    throw Error(ErrorCode::malformed_bitmap,
                fmt::format("bitmap {} has bits outside {} DQ width", hex, to_string(width)));
  }
  return bitmap;
}

std::string encode_bitmap(const ErrorBitmap& bitmap) { return bitmap.to_hex(); }

namespace {

struct LineReject {
  std::size_t column;
  std::string message;
};

void check_ceiling(const IngestResult& r, const IngestOptions& options) {
  if (r.data_lines == 0) return;
  const double rate = static_cast<double>(r.rejects.size()) / static_cast<double>(r.data_lines);
  if (rate > options.max_reject_rate) {
    throw Error(ErrorCode::reject_ceiling,
                fmt::format("{} of {} lines rejected (ceiling {})", r.rejects.size(), r.data_lines,
                            options.max_reject_rate));
  }
}

// Locates the 1-based column of `"key"` in a raw JSON line, or 1.
std::size_t key_column(std::string_view line, std::string_view key) {
  const auto pos = line.find(fmt::format("\"{}\"", key));
  return pos == std::string_view::npos ? 1 : pos + 1;
}

void parse_json_event(const json& j, std::string_view raw, EventLog& out) {
  auto fail = [&](std::string_view key, std::string message) -> LineReject {
    return {key_column(raw, key), std::move(message)};
  };
  if (!j.is_object()) throw LineReject{1, "line is not a JSON object"};
  const auto kind_it = j.find("kind");
  if (kind_it == j.end() || !kind_it->is_string()) throw fail("kind", "missing or non-string kind");
  const std::string kind = kind_it->get<std::string>();
  if (kind != "ce" && kind != "ue") throw fail("kind", fmt::format("unknown kind '{}'", kind));

  const auto ts_it = j.find("ts");
  if (ts_it == j.end() || !ts_it->is_number_integer()) throw fail("ts", "ts must be integer milliseconds");
  const auto ts = from_epoch_ms(ts_it->get<std::int64_t>());

  DimmId dimm;
  try {
    dimm = dimm_from_json(j.at("dimm"));
  } catch (const std::exception& e) {
    throw fail("dimm", fmt::format("bad dimm: {}", e.what()));
  }

  if (kind == "ce") {
    CeEvent ce;
    ce.timestamp = ts;
    ce.dimm = std::move(dimm);
    try {
      ce.cell = cell_from_json(j.at("cell"));
    } catch (const std::exception& e) {
      throw fail("cell", fmt::format("bad cell: {}", e.what()));
    }
    const auto bm = j.find("bitmap");
    if (bm == j.end() || !bm->is_string()) throw fail("bitmap", "missing bitmap");
    try {
      ce.bitmap = ErrorBitmap::from_word(parse_hex_word(bm->get<std::string>()));
    } catch (const Error& e) {
      throw fail("bitmap", e.what());
    }
    if (ce.bitmap.empty()) throw fail("bitmap", "malformed-bitmap: no error bits set");
    const auto count = j.find("count");
    if (count != j.end()) {
      if (!count->is_number_integer() || count->get<std::int64_t>() < 1) throw fail("count", "count must be >= 1");
      ce.count = count->get<int>();
    }
    out.ces.push_back(std::move(ce));
  } else {
    UeEvent ue;
    ue.timestamp = ts;
    ue.dimm = std::move(dimm);
    if (const auto cell = j.find("cell"); cell != j.end() && !cell->is_null()) {
      try {
        ue.cell = cell_from_json(*cell);
      } catch (const std::exception& e) {
        throw fail("cell", fmt::format("bad cell: {}", e.what()));
      }
    }
    if (const auto s = j.find("sudden"); s != j.end() && s->is_boolean()) ue.sudden = s->get<bool>();
    out.ues.push_back(std::move(ue));
  }
}

}  // namespace

IngestResult parse_jsonl_trace(std::istream& is, const IngestOptions& options) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++result.data_lines;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw LineReject{e.byte == 0 ? 1 : e.byte, fmt::format("invalid JSON: {}", e.what())};
      }
      parse_json_event(j, line, result.events);
    } catch (const LineReject& r) {
      result.rejects.push_back({"jsonl", line_no, r.column, line, {r.message}});
    }
  }
  check_ceiling(result, options);
  return result;
}

ColumnMap ColumnMap::canonical() {
  ColumnMap m;
  m.kind = "kind";
  m.count = "count";
  return m;
}

ColumnMap ColumnMap::from_json(const json& j) {
  ColumnMap m;
  auto str = [&](const char* key, std::string& field) {
    if (auto it = j.find(key); it != j.end()) field = it->get<std::string>();
  };
  auto opt = [&](const char* key, std::optional<std::string>& field) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) field = it->get<std::string>();
  };
  try {
    opt("kind", m.kind);
    str("timestamp", m.timestamp);
    str("server", m.server);
    str("socket", m.socket);
    str("channel", m.channel);
    str("slot", m.slot);
    str("rank", m.rank);
    str("device", m.device);
    str("bank_group", m.bank_group);
    str("bank", m.bank);
    str("row", m.row);
    str("column", m.column);
    str("bitmap", m.bitmap);
    opt("count", m.count);
    opt("width", m.width);
    if (auto it = j.find("default_width"); it != j.end()) {
      const auto w = parse_data_width(it->get<std::string>());
      if (!w) throw Error(ErrorCode::config, "default_width must be x4 or x8");
      m.default_width = *w;
    }
    if (auto it = j.find("delimiter"); it != j.end()) {
      const auto d = it->get<std::string>();
      if (d.size() != 1) throw Error(ErrorCode::config, "delimiter must be one character");
      m.delimiter = d[0];
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("column map: ") + e.what());
  }
  return m;
}

json ColumnMap::to_json() const {
  json j = {{"timestamp", timestamp}, {"server", server}, {"socket", socket},         {"channel", channel},
            {"slot", slot},           {"rank", rank},     {"device", device},         {"bank_group", bank_group},
            {"bank", bank},           {"row", row},       {"column", column},         {"bitmap", bitmap},
            {"default_width", std::string(to_string(default_width))}, {"delimiter", std::string(1, delimiter)}};
  if (kind) j["kind"] = *kind;
  if (count) j["count"] = *count;
  if (width) j["width"] = *width;
  return j;
}

namespace {

struct CsvField {
  std::string text;
  std::size_t column;  // 1-based character offset of the field start
};

// Splits one CSV record. Supports double-quoted fields with "" escapes;
// returns nullopt on an unterminated quote.
std::optional<std::vector<CsvField>> split_csv(std::string_view line, char delim) {
  std::vector<CsvField> out;
  std::size_t i = 0;
  while (true) {
    CsvField f{{}, i + 1};
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            f.text.push_back('"');
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          f.text.push_back(line[i++]);
        }
      }
      if (!closed) return std::nullopt;
      while (i < line.size() && line[i] != delim) f.text.push_back(line[i++]);
    } else {
      while (i < line.size() && line[i] != delim) f.text.push_back(line[i++]);
    }
    out.push_back(std::move(f));
    if (i >= line.size()) break;
    ++i;  // delimiter
  }
  return out;
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

IngestResult parse_csv_trace(std::istream& is, const ColumnMap& map, const IngestOptions& options) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> header;

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line, map.delimiter);
    if (header.empty()) {
      if (!fields) throw Error(ErrorCode::malformed_record, "unterminated quote in CSV header");
      for (std::size_t k = 0; k < fields->size(); ++k) header.emplace((*fields)[k].text, k);
      std::vector<std::string> required = {map.timestamp, map.server, map.socket, map.channel,
                                           map.slot,      map.rank,   map.device, map.bank_group,
                                           map.bank,      map.row,    map.column};
      if (!map.kind) required.push_back(map.bitmap);
      for (const auto& name : required) {
        if (!header.count(name)) throw Error(ErrorCode::config, fmt::format("CSV lacks mapped column '{}'", name));
      }
      continue;
    }
    ++result.data_lines;
    auto reject = [&](std::size_t column, std::string message) {
      result.rejects.push_back({"csv", line_no, column, line, {std::move(message)}});
    };
    if (!fields) {
      reject(1, "unterminated quoted field");
      continue;
    }
    auto field = [&](const std::string& name) -> const CsvField* {
      auto it = header.find(name);
      if (it == header.end() || it->second >= fields->size()) return nullptr;
      return &(*fields)[it->second];
    };
    auto end_column = [&]() { return line.size() + 1; };

    try {
      std::string kind = "ce";
      if (map.kind) {
        const auto* f = field(*map.kind);
        if (f == nullptr) throw LineReject{end_column(), "missing kind field"};
        kind = f->text;
        if (kind != "ce" && kind != "ue") throw LineReject{f->column, fmt::format("unknown kind '{}'", kind)};
      }
      auto integer = [&](const std::string& name, bool required) -> std::optional<std::int64_t> {
        const auto* f = field(name);
        if (f == nullptr || f->text.empty()) {
          if (required) throw LineReject{f ? f->column : end_column(), fmt::format("missing {}", name)};
          return std::nullopt;
        }
        const auto v = parse_int<std::int64_t>(f->text);
        if (!v) throw LineReject{f->column, fmt::format("{} is not an integer", name)};
        if (*v < 0) throw LineReject{f->column, fmt::format("{} is negative", name)};
        return v;
      };

      const auto ts = from_epoch_ms(*integer(map.timestamp, true));
      DimmId dimm;
      {
        const auto* f = field(map.server);
        if (f == nullptr || f->text.empty()) throw LineReject{f ? f->column : end_column(), "missing server"};
        dimm.server_id = f->text;
      }
      dimm.socket = static_cast<int>(*integer(map.socket, true));
      dimm.channel = static_cast<int>(*integer(map.channel, true));
      dimm.slot = static_cast<int>(*integer(map.slot, true));

      const bool is_ce = kind == "ce";
      const auto rank = integer(map.rank, is_ce);
      const auto device = integer(map.device, is_ce);
      const auto bank_group = integer(map.bank_group, is_ce);
      const auto bank = integer(map.bank, is_ce);
      const auto row = integer(map.row, is_ce);
      const auto col = integer(map.column, is_ce);
      std::optional<CellAddress> cell;
      if (rank && device && bank_group && bank && row && col) {
        cell = CellAddress{static_cast<int>(*rank), static_cast<int>(*device), static_cast<int>(*bank_group),
                           static_cast<int>(*bank), *row, *col};
      }

      if (is_ce) {
        DataWidth width = map.default_width;
        if (map.width) {
          if (const auto* f = field(*map.width); f != nullptr && !f->text.empty()) {
            const auto w = parse_data_width(f->text);
            if (!w) throw LineReject{f->column, "width must be x4 or x8"};
            width = *w;
          }
        }
        const auto* bf = field(map.bitmap);
        if (bf == nullptr) throw LineReject{end_column(), "missing bitmap"};
        CeEvent ce;
        ce.timestamp = ts;
        ce.dimm = std::move(dimm);
        ce.cell = *cell;
        try {
          ce.bitmap = decode_bitmap(bf->text, width);
        } catch (const Error& e) {
          throw LineReject{bf->column, e.what()};
        }
        if (ce.bitmap.empty()) throw LineReject{bf->column, "malformed-bitmap: no error bits set"};
        if (map.count) {
          if (const auto c = integer(*map.count, false)) {
            if (*c < 1) throw LineReject{field(*map.count)->column, "count must be >= 1"};
            ce.count = static_cast<int>(*c);
          }
        }
        result.events.ces.push_back(std::move(ce));
      } else {
        UeEvent ue;
        ue.timestamp = ts;
        ue.dimm = std::move(dimm);
        ue.cell = cell;
        result.events.ues.push_back(std::move(ue));
      }
    } catch (const LineReject& r) {
      reject(r.column, r.message);
    }
  }
  check_ceiling(result, options);
  return result;
}

void write_csv_trace(std::ostream& os, const EventLog& log) {
  os << "kind,ts,server,socket,channel,slot,rank,device,bank_group,bank,row,column,bitmap,count\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q.push_back('"');
      q.push_back(c);
    }
    q.push_back('"');
    return q;
  };
  for (const auto& e : log.ces) {
    os << fmt::format("ce,{},{},{},{},{},{},{},{},{},{},{},{},{}\n", epoch_ms(e.timestamp), quote(e.dimm.server_id),
                      e.dimm.socket, e.dimm.channel, e.dimm.slot, e.cell.rank, e.cell.device, e.cell.bank_group,
                      e.cell.bank, e.cell.row, e.cell.column, encode_bitmap(e.bitmap), e.count);
  }
  for (const auto& e : log.ues) {
    if (e.cell) {
      os << fmt::format("ue,{},{},{},{},{},{},{},{},{},{},{},,\n", epoch_ms(e.timestamp), quote(e.dimm.server_id),
                        e.dimm.socket, e.dimm.channel, e.dimm.slot, e.cell->rank, e.cell->device, e.cell->bank_group,
                        e.cell->bank, e.cell->row, e.cell->column);
    } else {
      os << fmt::format("ue,{},{},{},{},{},,,,,,,,\n", epoch_ms(e.timestamp), quote(e.dimm.server_id), e.dimm.socket,
                        e.dimm.channel, e.dimm.slot);
    }
  }
}

json to_json(const RawLogLine& r) {
  return {{"format", r.format}, {"line", r.line}, {"column", r.column}, {"raw", r.raw}, {"diagnostics", r.diagnostics}};
}

}  // namespace memfail
