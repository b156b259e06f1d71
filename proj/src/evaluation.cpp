#include "memfail/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "memfail/features.hpp"

namespace memfail {

using nlohmann::json;

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::tp: return "tp";
    case Outcome::fp: return "fp";
    case Outcome::fn: return "fn";
    case Outcome::tn: return "tn";
  }
  return "tn";
}

namespace {

std::map<DimmId, std::vector<Timestamp>> ue_times_by_dimm(std::span<const UeEvent> ues) {
  std::map<DimmId, std::vector<Timestamp>> out;
  for (const auto& u : ues) out[u.dimm].push_back(u.timestamp);
  for (auto& [_, v] : out) std::sort(v.begin(), v.end());
  return out;
}

void bump(Confusion& c, Outcome o) {
  switch (o) {
    case Outcome::tp: ++c.tp; break;
    case Outcome::fp: ++c.fp; break;
    case Outcome::fn: ++c.fn; break;
    case Outcome::tn: ++c.tn; break;
  }
}

}  // namespace

MatchResult match_outcomes(std::span<const PredictionRecord> predictions, std::span<const UeEvent> ues,
                           std::span<const DimmId> population, const WindowConfig& cfg) {
  std::map<DimmId, std::size_t> slot;
  for (std::size_t i = 0; i < population.size(); ++i) slot.emplace(population[i], i);
  const auto ue_times = ue_times_by_dimm(ues);

  MatchResult result;
  result.per_dimm.resize(population.size());
  for (std::size_t i = 0; i < population.size(); ++i) {
    auto& o = result.per_dimm[i];
    o.dimm = population[i];
    if (const auto it = ue_times.find(o.dimm); it != ue_times.end()) o.first_ue = it->second.front();
  }

  static const std::vector<Timestamp> kNone;
  for (const auto& p : predictions) {
    const auto it = slot.find(p.dimm);
    if (it == slot.end()) throw Error(ErrorCode::unknown_dimm, "prediction for DIMM outside population: " + p.dimm.to_string());
    if (!p.positive) continue;
    auto& o = result.per_dimm[it->second];
    if (!o.first_positive || p.t < *o.first_positive) o.first_positive = p.t;
    const auto ue = ue_times.find(p.dimm);
    const auto& times = ue == ue_times.end() ? kNone : ue->second;
    if (label(p.t, times, cfg) == Label::positive && (!o.first_hit || p.t < *o.first_hit)) o.first_hit = p.t;
  }

  for (auto& o : result.per_dimm) {
    if (o.first_ue) {
      o.outcome = o.first_hit ? Outcome::tp : Outcome::fn;
    } else {
      o.outcome = o.first_positive ? Outcome::fp : Outcome::tn;
    }
    bump(result.confusion, o.outcome);
  }
  return result;
}

Confusion match_ticks(std::span<const PredictionRecord> predictions, std::span<const UeEvent> ues,
                      const WindowConfig& cfg) {
  const auto ue_times = ue_times_by_dimm(ues);
  static const std::vector<Timestamp> kNone;
  Confusion c;
  for (const auto& p : predictions) {
    const auto ue = ue_times.find(p.dimm);
    const bool actual = label(p.t, ue == ue_times.end() ? kNone : ue->second, cfg) == Label::positive;
    bump(c, p.positive ? (actual ? Outcome::tp : Outcome::fp) : (actual ? Outcome::fn : Outcome::tn));
  }
  return c;
}

std::optional<double> f1_score(double precision, double recall) {
  if (precision + recall <= 0.0) return std::nullopt;
  return 2.0 * precision * recall / (precision + recall);
}

Metrics metrics(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  Metrics m;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (2 * tp + fp + fn > 0) m.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return m;
}

std::optional<double> virr(double precision, double recall, double y_c) {
  if (precision == 0.0) return std::nullopt;
  return (1.0 - y_c / precision) * recall;
}

VirrBreakdown virr_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn, double v_a, double y_c) {
  VirrBreakdown b;
  b.v = v_a * static_cast<double>(tp + fn);
  b.v1 = v_a * y_c * static_cast<double>(tp + fp);
  b.v2 = v_a * static_cast<double>(fn);
  b.v_prime = b.v1 + b.v2;
  if (b.v > 0.0) b.virr = (b.v - b.v_prime) / b.v;
  return b;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

json EvalReport::to_json() const {
  json platforms = json::object();
  for (const auto& [name, c] : per_platform) {
    const auto m = memfail::metrics(c.tp, c.fp, c.fn);
    platforms[name] = {{"confusion", memfail::to_json(c)},
                       {"precision", opt(m.precision)},
                       {"recall", opt(m.recall)},
                       {"f1", opt(m.f1)},
                       {"virr", m.precision && m.recall ? opt(memfail::virr(*m.precision, *m.recall, options.y_c))
                                                        : json(nullptr)}};
  }
  json j = {{"confusion", memfail::to_json(confusion)},
            {"precision", opt(metrics.precision)},
            {"recall", opt(metrics.recall)},
            {"f1", opt(metrics.f1)},
            {"virr", opt(virr)},
            {"y_c", options.y_c},
            {"v_a", options.v_a},
            {"interruptions",
             {{"v", breakdown.v}, {"v1", breakdown.v1}, {"v2", breakdown.v2}, {"v_prime", breakdown.v_prime}}},
            {"window",
             {{"observation_ms", window.observation.count()},
              {"lead_ms", window.lead.count()},
              {"prediction_ms", window.prediction.count()},
              {"sample_interval_ms", window.sample_interval.count()},
              {"prediction_interval_ms", window.prediction_interval.count()}}},
            {"per_platform", platforms}};
  j["tick_confusion"] = tick_confusion ? memfail::to_json(*tick_confusion) : json(nullptr);
  return j;
}

EvalReport evaluate(std::span<const PredictionRecord> predictions, const ValidatedTrace& trace,
                    std::span<const DimmId> population, const WindowConfig& window,
                    const EvalOptions& options) {
  window.validate();
  EvalReport r;
  r.options = options;
  r.window = window;
  auto match = match_outcomes(predictions, trace.ues(), population, window);
  r.confusion = match.confusion;
  r.metrics = metrics(r.confusion.tp, r.confusion.fp, r.confusion.fn);
  if (r.metrics.precision && r.metrics.recall) r.virr = virr(*r.metrics.precision, *r.metrics.recall, options.y_c);
  r.breakdown = virr_from_counts(r.confusion.tp, r.confusion.fp, r.confusion.fn, options.v_a, options.y_c);
  if (options.tick_level) r.tick_confusion = match_ticks(predictions, trace.ues(), window);
  for (const auto& o : match.per_dimm) {
    const auto* meta = trace.meta_of(o.dimm);
    bump(r.per_platform[meta ? std::string(to_string(meta->platform)) : "unknown"], o.outcome);
  }
  r.outcomes = std::move(match.per_dimm);
  return r;
}

void write_outcomes_csv(std::ostream& os, std::span<const DimmOutcome> outcomes) {
  os << "server,socket,channel,slot,outcome,first_ue,first_positive,first_hit\n";
  auto ts = [](const std::optional<Timestamp>& t) { return t ? std::to_string(epoch_ms(*t)) : std::string(); };
  for (const auto& o : outcomes) {
    os << fmt::format("{},{},{},{},{},{},{},{}\n", o.dimm.server_id, o.dimm.socket, o.dimm.channel, o.dimm.slot,
                      to_string(o.outcome), ts(o.first_ue), ts(o.first_positive), ts(o.first_hit));
  }
}

void write_predictions_csv(std::ostream& os, std::span<const PredictionRecord> predictions) {
  os << "server,socket,channel,slot,t,score,positive\n";
  for (const auto& p : predictions) {
    os << fmt::format("{},{},{},{},{},{},{}\n", p.dimm.server_id, p.dimm.socket, p.dimm.channel, p.dimm.slot,
                      epoch_ms(p.t), p.score, p.positive ? 1 : 0);
  }
}

namespace {

template <typename T>
T field(std::string_view s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::malformed_record, fmt::format("predictions line {}: bad value '{}'", line, s));
  }
  return v;
}

}  // namespace

std::vector<PredictionRecord> read_predictions_csv(std::istream& is) {
  std::vector<PredictionRecord> out;
  std::string line;
  if (!std::getline(is, line)) return out;
  if (line != "server,socket,channel,slot,t,score,positive") {
    throw Error(ErrorCode::malformed_record, "unexpected predictions header");
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    for (auto pos = rest.find(','); pos != std::string_view::npos; pos = rest.find(',')) {
      cells.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    cells.push_back(rest);
    if (cells.size() != 7) throw Error(ErrorCode::malformed_record, fmt::format("predictions line {}: 7 fields expected", line_no));
    PredictionRecord p;
    p.dimm = {std::string(cells[0]), field<int>(cells[1], line_no), field<int>(cells[2], line_no),
              field<int>(cells[3], line_no)};
    p.t = from_epoch_ms(field<std::int64_t>(cells[4], line_no));
    p.score = field<double>(cells[5], line_no);
    p.positive = field<int>(cells[6], line_no) != 0;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace memfail
