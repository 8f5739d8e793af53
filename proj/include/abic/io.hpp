#pragma once

// File formats: numeric CSV, graph JSON, Graphviz DOT, prior-knowledge JSON,
// and run manifests.

#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "abic/constraints.hpp"
#include "abic/errors.hpp"
#include "abic/graph.hpp"
#include "abic/optimizer.hpp"

namespace abic::io {

using Json = nlohmann::ordered_json;

// --- CSV ----------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd data;  ///< rows × header.size()
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

inline bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace detail

/// Parses a header row followed by numeric rows. `source` names the input in
/// error messages. Rows and columns in messages are 1-based; the header is row 1.
inline CsvTable parse_csv(std::istream& in, const std::string& source = "input") {
  std::string line;
  std::size_t row = 0;
  auto where = [&](std::size_t r) { return source + ": row " + std::to_string(r); };

  CsvTable table;
  while (std::getline(in, line)) {
    ++row;
    if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!detail::blank(line)) break;
  }
  if (detail::blank(line)) throw InputError(source + ": empty file, expected a header row");
  for (auto& name : detail::split_fields(line)) table.header.push_back(detail::unquote(name));
  const std::size_t cols = table.header.size();
  for (std::size_t c = 0; c < cols; ++c)
    if (table.header[c].empty())
      throw InputError(where(row) + ", column " + std::to_string(c + 1) + ": empty column name");

  std::vector<double> values;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++row;
    if (detail::blank(line)) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != cols)
      throw InputError(where(row) + ": expected " + std::to_string(cols) + " fields, found " +
                       std::to_string(fields.size()));
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string& f = fields[c];
      const std::string at =
          where(row) + ", column " + std::to_string(c + 1) + " (" + table.header[c] + ")";
      if (f.empty()) throw InputError(at + ": missing value");
      double v = 0.0;
      const char* begin = f.data();
      const char* end = f.data() + f.size();
      if (*begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end)
        throw InputError(at + ": '" + f + "' is not a number");
      if (!std::isfinite(v)) throw InputError(at + ": non-finite value");
      values.push_back(v);
    }
    ++n;
  }
  table.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      table.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
  return table;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  return parse_csv(in, path.string());
}

/// Shortest text that reads back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& data) {
  if (static_cast<Eigen::Index>(header.size()) != data.cols())
    throw ParameterError("header and data widths differ");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) out << (c ? "," : "") << format_real(data(r, c));
    out << '\n';
  }
}

inline std::vector<std::string> default_names(Eigen::Index d) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < d; ++i) names.push_back("X" + std::to_string(i + 1));
  return names;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

// --- Graph JSON ---------------------------------------------------------------

struct GraphDocument {
  Parameters theta;
  AdmgStructure structure;
  double threshold = 0.05;
  double h_final = 0.0;
  bool converged = false;
  std::vector<std::string> variables;  ///< optional column names
  std::optional<std::string> manifest;  ///< file name of the producing manifest
};

inline GraphDocument make_document(const Parameters& theta, double threshold_value, double h_final,
                                   bool converged) {
  GraphDocument doc;
  doc.theta = theta;
  doc.structure = threshold(theta, threshold_value);
  doc.threshold = threshold_value;
  doc.h_final = h_final;
  doc.converged = converged;
  return doc;
}

inline Json to_json(const GraphDocument& doc) {
  const Eigen::Index d = doc.theta.dim();
  auto matrix = [d](const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < d; ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < d; ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  Json directed = Json::array();
  Json bidirected = Json::array();
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      if (doc.structure.directed(j, i) != 0) directed.push_back({j, i});
      if (j < i && doc.structure.bidirected(j, i) != 0) bidirected.push_back({j, i});
    }

  Json out;
  out["d"] = d;
  out["delta"] = matrix(doc.theta.delta);
  out["omega"] = matrix(doc.theta.omega);
  out["directed_edges"] = std::move(directed);
  out["bidirected_edges"] = std::move(bidirected);
  out["threshold"] = doc.threshold;
  out["h_final"] = doc.h_final;
  out["converged"] = doc.converged;
  if (!doc.variables.empty()) out["variables"] = doc.variables;
  if (doc.manifest) out["manifest"] = *doc.manifest;
  return out;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

/// Reads the schema written by to_json. The edge lists define `structure`.
inline GraphDocument graph_from_json(const Json& j, const std::string& source = "graph") {
  auto fail = [&](const std::string& what) { return InputError(source + ": " + what); };
  if (!j.is_object()) throw fail("expected a JSON object");
  for (const char* key : {"d", "delta", "omega", "directed_edges", "bidirected_edges"})
    if (!j.contains(key)) throw fail(std::string("missing key '") + key + "'");
  if (!j["d"].is_number_integer() || j["d"].get<long long>() < 1)
    throw fail("'d' must be a positive integer");
  const auto d = static_cast<Eigen::Index>(j["d"].get<long long>());

  auto matrix = [&](const char* key) {
    const Json& rows = j[key];
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != d)
      throw fail(std::string("'") + key + "' must have d rows");
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      const Json& row = rows[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d)
        throw fail(std::string("'") + key + "' row " + std::to_string(r) + " must have d entries");
      for (Eigen::Index c = 0; c < d; ++c) {
        const Json& v = row[static_cast<std::size_t>(c)];
        if (!v.is_number()) throw fail(std::string("'") + key + "' has a non-numeric entry");
        m(r, c) = v.get<double>();
      }
    }
    return m;
  };
  GraphDocument doc;
  doc.theta.delta = matrix("delta");
  doc.theta.omega = matrix("omega");
  doc.structure = AdmgStructure::empty(d);

  auto edges = [&](const char* key, auto&& apply) {
    const Json& list = j[key];
    if (!list.is_array()) throw fail(std::string("'") + key + "' must be an array");
    for (const Json& e : list) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
        throw fail(std::string("'") + key + "' entries must be [int, int]");
      const auto a = e[0].get<long long>();
      const auto b = e[1].get<long long>();
      if (a < 0 || b < 0 || a >= d || b >= d || a == b)
        throw fail(std::string("'") + key + "' has an invalid index pair");
      apply(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  };
  edges("directed_edges", [&](Eigen::Index a, Eigen::Index b) { doc.structure.directed(a, b) = 1; });
  edges("bidirected_edges", [&](Eigen::Index a, Eigen::Index b) {
    doc.structure.bidirected(a, b) = 1;
    doc.structure.bidirected(b, a) = 1;
  });

  if (j.contains("threshold")) doc.threshold = j["threshold"].get<double>();
  if (j.contains("h_final")) doc.h_final = j["h_final"].get<double>();
  if (j.contains("converged")) doc.converged = j["converged"].get<bool>();
  if (j.contains("variables")) {
    doc.variables = j["variables"].get<std::vector<std::string>>();
    if (static_cast<Eigen::Index>(doc.variables.size()) != d)
      throw fail("'variables' must have d names");
  }
  if (j.contains("manifest")) doc.manifest = j["manifest"].get<std::string>();
  try {
    validate(doc.theta);
  } catch (const ParameterError& e) {
    throw fail(e.what());
  }
  return doc;
}

inline GraphDocument read_graph(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return graph_from_json(j, path.string());
}

// --- DOT ----------------------------------------------------------------------

namespace detail {
inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

inline std::string to_dot(const AdmgStructure& s, const std::vector<std::string>& names = {}) {
  const Eigen::Index d = s.dim();
  const auto labels = names.empty() ? default_names(d) : names;
  if (static_cast<Eigen::Index>(labels.size()) != d) throw ParameterError("one name per vertex");
  std::ostringstream out;
  out << "digraph admg {\n";
  for (Eigen::Index i = 0; i < d; ++i) out << "  " << detail::dot_quote(labels[i]) << ";\n";
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i)
      if (s.directed(j, i) != 0)
        out << "  " << detail::dot_quote(labels[j]) << " -> " << detail::dot_quote(labels[i]) << ";\n";
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j)
      if (s.bidirected(i, j) != 0)
        out << "  " << detail::dot_quote(labels[i]) << " -> " << detail::dot_quote(labels[j])
            << " [dir=both, style=dashed];\n";
  out << "}\n";
  return out.str();
}

// --- Prior knowledge ----------------------------------------------------------

/// Keys: "tiers" (list of lists of names), "unconfounded" (list of name pairs),
/// "forbidden" (list of ordered [from, to] pairs). Names must match `header`.
inline PriorKnowledge prior_from_json(const Json& j, const std::vector<std::string>& header,
                                      const std::string& source = "prior") {
  auto fail = [&](const std::string& what) { return InputError(source + ": " + what); };
  if (!j.is_object()) throw fail("expected a JSON object");
  std::map<std::string, int> index;
  for (std::size_t k = 0; k < header.size(); ++k) index[header[k]] = static_cast<int>(k);
  auto lookup = [&](const Json& name) {
    if (!name.is_string()) throw fail("variable names must be strings");
    const auto it = index.find(name.get<std::string>());
    if (it == index.end()) throw fail("unknown variable '" + name.get<std::string>() + "'");
    return it->second;
  };
  auto pairs = [&](const char* key) {
    std::vector<std::pair<int, int>> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw fail(std::string("'") + key + "' must be an array");
    for (const Json& p : j[key]) {
      if (!p.is_array() || p.size() != 2) throw fail(std::string("'") + key + "' entries must be pairs");
      const int a = lookup(p[0]);
      const int b = lookup(p[1]);
      if (a == b) throw fail(std::string("'") + key + "' pair names the same variable twice");
      out.emplace_back(a, b);
    }
    return out;
  };

  for (const auto& item : j.items())
    if (item.key() != "tiers" && item.key() != "unconfounded" && item.key() != "forbidden")
      throw fail("unknown key '" + item.key() + "'");

  PriorKnowledge prior;
  if (j.contains("tiers")) {
    if (!j["tiers"].is_array()) throw fail("'tiers' must be an array of arrays");
    for (const Json& tier : j["tiers"]) {
      if (!tier.is_array()) throw fail("'tiers' must be an array of arrays");
      std::vector<int> members;
      for (const Json& name : tier) members.push_back(lookup(name));
      prior.tiers.push_back(std::move(members));
    }
  }
  prior.unconfounded = pairs("unconfounded");
  prior.forbidden_directed = pairs("forbidden");
  try {
    validate(prior, static_cast<int>(header.size()));
  } catch (const ParameterError& e) {
    throw fail(e.what());
  }
  return prior;
}

inline PriorKnowledge read_prior(const std::filesystem::path& path,
                                 const std::vector<std::string>& header) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return prior_from_json(j, header, path.string());
}

// --- Digests and manifests ------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string digest(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t raw = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&raw, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Provenance for one command invocation. Output files point at it by name,
/// and it lists every output with its digest.
struct RunManifest {
  std::string command;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   ///< path -> digest
  std::vector<std::pair<std::string, std::string>> outputs;  ///< file -> digest
  std::string version;
  std::string started_at;
  std::string finished_at;
  Json extra = Json::object();

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["version"] = version;
    j["seed"] = seed;
    j["config"] = config;
    Json in = Json::object();
    for (const auto& [path, dig] : inputs) in[path] = dig;
    j["inputs"] = std::move(in);
    Json out = Json::array();
    for (const auto& [file, dig] : outputs) out.push_back({{"file", file}, {"digest", dig}});
    j["outputs"] = std::move(out);
    for (const auto& item : extra.items()) j[item.key()] = item.value();
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    return j;
  }
};

}  // namespace abic::io
