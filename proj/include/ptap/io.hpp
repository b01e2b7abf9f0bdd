#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ptap/assignment.hpp"
#include "ptap/calibration.hpp"
#include "ptap/error.hpp"
#include "ptap/netgen.hpp"
#include "ptap/network.hpp"

namespace ptap::io {

namespace fs = std::filesystem;

/// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidInput, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write " + path.string());
  out << text;
}

class CsvTable {
 public:
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // source line of each row

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
  std::size_t col(std::string_view name) const {
    auto c = find(name);
    if (!c) fail(ErrorCode::ParseError, source + ": missing column '" + std::string(name) + "'");
    return *c;
  }
  std::string where(std::size_t row) const { return source + ":" + std::to_string(lines[row]); }

  const std::string& cell(std::size_t row, std::size_t c) const {
    if (c >= rows[row].size()) fail(ErrorCode::ParseError, where(row) + ": too few fields");
    return rows[row][c];
  }
  double number(std::size_t row, std::size_t c) const {
    const std::string& s = cell(row, c);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      fail(ErrorCode::ParseError, where(row) + ": '" + s + "' is not a number");
    return v;
  }
  std::int64_t integer(std::size_t row, std::size_t c) const {
    const std::string& s = cell(row, c);
    std::int64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
      fail(ErrorCode::ParseError, where(row) + ": '" + s + "' is not an integer");
    return v;
  }
  bool blank(std::size_t row, std::size_t c) const { return c >= rows[row].size() || rows[row][c].empty(); }
};

/// RFC 4180 style: quoted fields may hold commas, doubled quotes and newlines.
inline CsvTable parse_csv(std::string_view text, std::string source = "<csv>") {
  CsvTable t;
  t.source = std::move(source);
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1, record_line = 1;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool empty_line = record.size() == 1 && record[0].empty() && !any;
    if (!empty_line) {
      if (t.header.empty()) {
        t.header = std::move(record);
      } else {
        t.rows.push_back(std::move(record));
        t.lines.push_back(record_line);
      }
    }
    record.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
    } else if (ch == '"') {
      quoted = any = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
      record_line = ++line;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) fail(ErrorCode::ParseError, t.source + ": unterminated quote");
  if (any || !field.empty()) end_record();
  for (auto& h : t.header) {
    h.erase(0, h.find_first_not_of(" \t\xEF\xBB\xBF"));
    h.erase(h.find_last_not_of(" \t") + 1);
  }
  return t;
}

inline CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

// ---- network-core files

inline std::vector<Node> read_nodes(const fs::path& path) {
  const auto t = read_csv(path);
  const auto ci = t.col("id"), cx = t.col("x"), cy = t.col("y"), ck = t.col("kind");
  std::vector<Node> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    NodeKind kind{};
    try {
      kind = parse_node_kind(t.cell(r, ck));
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, t.where(r) + ": " + e.what());
    }
    out.push_back({t.integer(r, ci), {t.number(r, cx), t.number(r, cy)}, kind});
  }
  return out;
}

inline std::vector<Link> read_links(const fs::path& path) {
  const auto t = read_csv(path);
  const auto ci = t.col("id"), cf = t.col("from"), ct = t.col("to"), cl = t.col("length_m"), cw = t.col("width_m"),
             cc = t.col("capacity_ped_per_m_hr"), cs = t.col("free_flow_speed_m_s"), ck = t.col("kind");
  const auto cm = t.find("mirror_id");
  std::vector<Link> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Link l;
    l.id = t.integer(r, ci);
    l.from = t.integer(r, cf);
    l.to = t.integer(r, ct);
    l.length = t.number(r, cl);
    l.width = t.number(r, cw);
    l.capacity = t.number(r, cc);
    const double speed = t.number(r, cs);
    if (!(speed > 0.0)) fail(ErrorCode::NonPositiveAttribute, t.where(r) + ": free-flow speed must be positive");
    l.free_flow_time = l.length / speed;
    try {
      l.kind = parse_link_kind(t.cell(r, ck));
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, t.where(r) + ": " + e.what());
    }
    if (cm && !t.blank(r, *cm)) l.mirror = t.integer(r, *cm);
    out.push_back(l);
  }
  return out;
}

inline DemandTable read_demand(const fs::path& path, double period_s) {
  const auto t = read_csv(path);
  const auto co = t.col("origin"), cd = t.col("destination"), cq = t.col("demand_ped");
  DemandTable d;
  d.period_s = period_s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) d.entries.push_back({t.integer(r, co), t.integer(r, cd), t.number(r, cq)});
  return d;
}

inline std::string nodes_csv(const Network& net) {
  std::string s = "id,x,y,kind\n";
  for (const auto& n : net.nodes())
    s += std::to_string(n.id) + "," + fmt(n.position.x) + "," + fmt(n.position.y) + "," + std::string(to_string(n.kind)) + "\n";
  return s;
}

inline std::string links_csv(const Network& net) {
  std::string s = "id,from,to,length_m,width_m,capacity_ped_per_m_hr,free_flow_speed_m_s,kind,mirror_id\n";
  for (std::size_t i = 0; i < net.link_count(); ++i) {
    const auto& l = net.links()[i];
    s += std::to_string(l.id) + "," + std::to_string(l.from) + "," + std::to_string(l.to) + "," + fmt(l.length) + "," +
         fmt(l.width) + "," + fmt(l.capacity) + "," + fmt(l.length / l.free_flow_time) + "," +
         std::string(to_string(l.kind)) + "," + std::to_string(net.links()[net.mirror_index(i)].id) + "\n";
  }
  return s;
}

inline std::string demand_csv(const DemandTable& d) {
  std::string s = "origin,destination,demand_ped\n";
  for (const auto& e : d.entries) s += std::to_string(e.origin) + "," + std::to_string(e.destination) + "," + fmt(e.demand) + "\n";
  return s;
}

// ---- assignment results

inline std::string link_results_csv(const Network& net, const AssignmentResult& r) {
  std::string s = "link_id,volume_ped,flow_ped_per_m_hr,travel_time_s\n";
  for (std::size_t i = 0; i < net.link_count(); ++i)
    s += std::to_string(net.links()[i].id) + "," + fmt(r.link_volumes[i]) + "," + fmt(r.link_flows[i]) + "," +
         fmt(r.link_times[i]) + "\n";
  return s;
}

/// Paths with positive flow, ranked within each OD by descending flow.
inline std::string paths_csv(const AssignmentResult& r, double min_flow = 1e-9) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < r.paths.size(); ++i)
    if (r.paths[i].flow > min_flow) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = r.paths[a];
    const auto& pb = r.paths[b];
    if (pa.origin != pb.origin) return pa.origin < pb.origin;
    if (pa.destination != pb.destination) return pa.destination < pb.destination;
    if (pa.flow != pb.flow) return pa.flow > pb.flow;
    return pa.links < pb.links;
  });
  std::string s = "origin,destination,path_rank,link_sequence,flow_ped,cost_s\n";
  int rank = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& p = r.paths[idx[k]];
    const bool new_od = k == 0 || r.paths[idx[k - 1]].origin != p.origin || r.paths[idx[k - 1]].destination != p.destination;
    rank = new_od ? 1 : rank + 1;
    std::string seq;
    for (LinkId l : p.links) seq += (seq.empty() ? "" : " ") + std::to_string(l);
    s += std::to_string(p.origin) + "," + std::to_string(p.destination) + "," + std::to_string(rank) + "," + seq + "," +
         fmt(p.flow) + "," + fmt(r.path_costs[idx[k]]) + "\n";
  }
  return s;
}

inline std::string summary_text(const RunSummary& s, std::string_view family) {
  std::ostringstream o;
  o << "family = " << family << "\n"
    << "tstt_s = " << fmt(s.tstt) << "\n"
    << "average_link_volume_ped = " << fmt(s.average_link_volume) << "\n"
    << "path_count = " << s.path_count << "\n"
    << "average_path_volume_ped = " << fmt(s.average_path_volume) << "\n"
    << "average_trip_time_s = " << fmt(s.average_trip_time) << "\n"
    << "empty_links = " << s.empty_links << "\n"
    << "iterations = " << s.iterations << "\n"
    << "final_gap = " << fmt(s.final_gap) << "\n"
    << "converged = " << (s.converged ? "true" : "false") << "\n";
  return o.str();
}

/// Reads `key = value` lines; blank lines and '#' comments are skipped.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::string gap_history_csv(const AssignmentResult& r) {
  std::string s = "iteration,relative_gap\n";
  for (std::size_t i = 0; i < r.gap_history.size(); ++i) s += std::to_string(i + 1) + "," + fmt(r.gap_history[i]) + "\n";
  return s;
}

/// link_id -> volume_ped from a link results file.
inline std::map<LinkId, double> read_link_volumes(const fs::path& path) {
  const auto t = read_csv(path);
  const auto ci = t.col("link_id"), cv = t.col("volume_ped");
  std::map<LinkId, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) out[t.integer(r, ci)] = t.number(r, cv);
  return out;
}

// ---- calibration

inline std::vector<Observation> read_observations(const fs::path& path) {
  const auto t = read_csv(path);
  const auto ck = t.col("density_ped_m2"), cu = t.col("speed_m_s"), ct = t.col("travel_time_s");
  const auto cr = t.find("ref_flow"), cc = t.find("counter_flow");
  std::vector<Observation> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    Observation o{t.number(r, ck), t.number(r, cu), t.number(r, ct), std::nullopt, std::nullopt};
    if (cr && cc && !t.blank(r, *cr) && !t.blank(r, *cc)) {
      o.ref_flow = t.number(r, *cr);
      o.counter_flow = t.number(r, *cc);
    }
    if (!(o.density >= 0.0) || !(o.speed >= 0.0) || !(o.travel_time > 0.0))
      fail(ErrorCode::InvalidInput, t.where(r) + ": density, speed must be >= 0 and travel time > 0");
    out.push_back(o);
  }
  return out;
}

inline std::string fit_report_text(const std::string& name, const FitReport& r) {
  std::ostringstream o;
  o << "[" << name << "]\n";
  for (const auto& [k, v] : r.params) o << k << " = " << fmt(v) << "\n";
  o << "root_sse = " << fmt(r.fit.root_sse) << "\n"
    << "rmse_mean = " << fmt(r.fit.rmse_mean) << "\n"
    << "r_squared = " << fmt(r.fit.r_squared) << "\n"
    << "iterations = " << r.iterations << "\n"
    << "converged = " << (r.converged ? "true" : "false") << "\n";
  return o.str();
}

inline std::string fit_report_row(const std::string& name, const FitReport& r) {
  std::string params;
  for (const auto& [k, v] : r.params) params += (params.empty() ? "" : " ") + k + "=" + fmt(v);
  return name + "," + params + "," + fmt(r.fit.root_sse) + "," + fmt(r.fit.rmse_mean) + "," + fmt(r.fit.r_squared) +
         "," + std::to_string(r.iterations) + "," + (r.converged ? "true" : "false") + "\n";
}

inline constexpr std::string_view kFitReportHeader = "fit,parameters,root_sse,rmse_mean,r_squared,iterations,converged\n";

// ---- geometry

inline std::vector<Centerline> parse_geojson_centerlines(std::string_view text, const std::string& source = "<geojson>") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
  std::vector<nlohmann::json> features;
  if (doc.value("type", "") == "FeatureCollection") {
    for (const auto& f : doc.at("features")) features.push_back(f);
  } else if (doc.value("type", "") == "Feature") {
    features.push_back(doc);
  } else {
    fail(ErrorCode::ParseError, source + ": expected a Feature or FeatureCollection");
  }
  auto to_line = [&](const nlohmann::json& coords) {
    geo::Polyline p;
    for (const auto& c : coords) {
      if (!c.is_array() || c.size() < 2) fail(ErrorCode::ParseError, source + ": bad coordinate");
      p.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    return p;
  };
  std::vector<Centerline> out;
  std::vector<bool> given;
  std::int64_t next = 1;
  for (const auto& f : features) {
    if (!f.contains("geometry") || f["geometry"].is_null()) continue;
    const auto& g = f["geometry"];
    const std::string type = g.value("type", "");
    const auto props = f.value("properties", nlohmann::json::object());
    std::string cls = props.contains("road_class") && props["road_class"].is_string() ? props["road_class"].get<std::string>() : "";
    std::optional<std::int64_t> id;
    if (f.contains("id") && f["id"].is_number_integer()) id = f["id"].get<std::int64_t>();
    else if (props.contains("id") && props["id"].is_number_integer()) id = props["id"].get<std::int64_t>();
    std::vector<geo::Polyline> parts;
    if (type == "LineString") parts.push_back(to_line(g.at("coordinates")));
    else if (type == "MultiLineString")
      for (const auto& part : g.at("coordinates")) parts.push_back(to_line(part));
    else
      continue;  // points and polygons are not road centerlines
    for (std::size_t k = 0; k < parts.size(); ++k) {
      given.push_back(id && k == 0);
      out.push_back({given.back() ? *id : 0, std::move(parts[k]), cls});
    }
  }
  // Fill missing ids after the largest given one.
  for (std::size_t i = 0; i < out.size(); ++i)
    if (given[i]) next = std::max(next, out[i].id + 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!given[i]) out[i].id = next++;
  return out;
}

inline geo::Polyline parse_wkt_linestring(std::string_view wkt) {
  std::string s(wkt);
  std::string upper = s;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  const auto open = s.find('('), close = s.rfind(')');
  if (upper.find("LINESTRING") == std::string::npos || open == std::string::npos || close == std::string::npos ||
      close < open)
    fail(ErrorCode::ParseError, "not a WKT LINESTRING: " + s);
  geo::Polyline p;
  std::istringstream pts(s.substr(open + 1, close - open - 1));
  std::string pair;
  while (std::getline(pts, pair, ',')) {
    std::istringstream xy(pair);
    double x = 0.0, y = 0.0;
    if (!(xy >> x >> y)) fail(ErrorCode::ParseError, "bad WKT coordinate: " + pair);
    p.push_back({x, y});
  }
  return p;
}

inline std::vector<Centerline> read_centerlines(const fs::path& path) {
  const std::string text = read_text(path);
  const std::string ext = path.extension().string();
  if (ext == ".csv") {
    const auto t = parse_csv(text, path.string());
    if (t.header.empty()) fail(ErrorCode::EmptyInput, path.string() + ": empty file");
    const auto ci = t.col("id"), cw = t.col("wkt_linestring"), cc = t.col("road_class");
    std::vector<Centerline> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back({t.integer(r, ci), parse_wkt_linestring(t.cell(r, cw)), t.cell(r, cc)});
    return out;
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) fail(ErrorCode::EmptyInput, path.string() + ": empty file");
  return parse_geojson_centerlines(text, path.string());
}

inline std::string links_geojson(const GenResult& g) {
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::ordered_json::array();
  const auto& net = g.network;
  for (std::size_t i = 0; i < net.link_count(); ++i) {
    const auto& l = net.links()[i];
    nlohmann::ordered_json coords = nlohmann::ordered_json::array();
    for (const auto& p : g.link_geometry[i]) coords.push_back({p.x + 0.0, p.y + 0.0});
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["id"] = l.id;
    f["properties"] = {{"id", l.id},          {"from", l.from},         {"to", l.to},
                       {"kind", to_string(l.kind)}, {"length_m", l.length}, {"mirror_id", net.links()[net.mirror_index(i)].id}};
    f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
    fc["features"].push_back(f);
  }
  return fc.dump(1) + "\n";
}

inline std::string gen_report_text(const GenReport& r) {
  std::ostringstream o;
  for (const auto& [k, v] : r.node_counts) o << "nodes." << k << " = " << v << "\n";
  for (const auto& [k, v] : r.link_counts) o << "links." << k << " = " << v << "\n";
  o << "blocks = " << r.blocks << "\n";
  o << "incomplete_blocks = " << r.incomplete_blocks.size() << "\n";
  for (const auto& [c, n] : r.incomplete_blocks) o << "incomplete_block." << c << " = " << n << " connectors\n";
  o << "dropped = " << r.dropped.size() << "\n";
  for (std::size_t i = 0; i < r.dropped.size(); ++i)
    o << "dropped." << i + 1 << " = " << r.dropped[i].feature << ": " << r.dropped[i].reason << "\n";
  return o.str();
}

}  // namespace ptap::io
