#include "predset/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <tuple>

namespace predset {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto line = trim(text.substr(start, end == std::string_view::npos ? end : end - start));
    if (!line.empty()) out.emplace_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedInput, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view text) {
  text = trim(text);
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedInput, "not a nonnegative integer: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string> split_fields(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, end == std::string_view::npos ? end : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  // Write next to the target and rename so readers never see a partial file.
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot move into " + path.string() + ": " + ec.message());
}

Dataset load_scored_dataset(const std::filesystem::path& path, double tolerance) {
  const auto lines = lines_of(read_text(path));
  if (lines.empty()) throw Error(ErrorCode::MalformedHeader, path.string() + " is empty");
  const auto header = split_fields(lines[0]);
  static constexpr std::string_view kFixed[] = {"id", "true_label", "human_pred", "noise_tag"};
  if (header.size() < 6) {
    throw Error(ErrorCode::MalformedHeader, where(path, 1) + ": need at least two score columns");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (header[i] != kFixed[i]) {
      throw Error(ErrorCode::MalformedHeader,
                  where(path, 1) + ": column " + std::to_string(i) + " should be '" +
                      std::string(kFixed[i]) + "'");
    }
  }
  Dataset ds;
  ds.label_count = header.size() - 4;
  for (std::size_t j = 0; j < ds.label_count; ++j) {
    if (header[4 + j] != "f_" + std::to_string(j)) {
      throw Error(ErrorCode::MalformedHeader,
                  where(path, 1) + ": expected f_" + std::to_string(j) + ", got '" +
                      header[4 + j] + "'");
    }
  }
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ArityMismatch, where(path, li + 1) + ": " +
                                                std::to_string(fields.size()) + " fields, expected " +
                                                std::to_string(header.size()));
    }
    InstanceRecord r;
    try {
      r.id = fields[0];
      if (r.id.empty()) throw Error(ErrorCode::MalformedInput, "empty id");
      r.true_label = parse_size(fields[1]);
      if (!fields[2].empty()) r.human_pred = parse_size(fields[2]);
      if (!fields[3].empty()) r.noise_tag = parse_double(fields[3]);
      std::vector<double> scores(ds.label_count);
      for (std::size_t j = 0; j < ds.label_count; ++j) scores[j] = parse_double(fields[4 + j]);
      r.scores = ProbVector::make(std::move(scores), tolerance);
    } catch (const Error& e) {
      throw Error(e.code(), where(path, li + 1) + " (row " + std::to_string(li) +
                                (r.id.empty() ? std::string() : ", id '" + r.id + "'") + "): " + e.what());
    }
    if (r.true_label >= ds.label_count || (r.human_pred && *r.human_pred >= ds.label_count)) {
      throw Error(ErrorCode::LabelOutOfRange, where(path, li + 1) + ": label outside [0,L)");
    }
    ds.records.push_back(std::move(r));
  }
  ds.validate();
  return ds;
}

void save_scored_dataset(const std::filesystem::path& path, const Dataset& ds) {
  ds.validate();
  std::string out = "id,true_label,human_pred,noise_tag";
  for (std::size_t j = 0; j < ds.label_count; ++j) out += ",f_" + std::to_string(j);
  out += '\n';
  for (const auto& r : ds.records) {
    out += r.id;
    out += ',' + std::to_string(r.true_label) + ',';
    if (r.human_pred) out += std::to_string(*r.human_pred);
    out += ',';
    if (r.noise_tag) out += format_double(*r.noise_tag);
    for (double v : r.scores.values()) out += ',' + format_double(v);
    out += '\n';
  }
  write_text(path, out);
}

Graph parse_graph(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::MalformedInput, "graph text is empty");
  Graph g(parse_size(lines[0]));
  for (std::size_t li = 1; li < lines.size(); ++li) {
    std::istringstream ss(lines[li]);
    std::string a, b, extra;
    if (!(ss >> a >> b) || (ss >> extra)) {
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(li + 1) + ": expected 'u v'");
    }
    g.add_edge(parse_size(a), parse_size(b));
  }
  return g;
}

Graph load_graph(const std::filesystem::path& path) { return parse_graph(read_text(path)); }

void save_graph(const std::filesystem::path& path, const Graph& g) {
  std::string out = std::to_string(g.size()) + '\n';
  for (const auto& [u, v] : g.edges()) out += std::to_string(u) + ' ' + std::to_string(v) + '\n';
  write_text(path, out);
}

ConfusionMatrix load_confusion(const std::filesystem::path& path, double tolerance) {
  const auto lines = lines_of(read_text(path));
  std::vector<std::vector<double>> rows;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::vector<double> row;
    for (const auto& f : split_fields(lines[li])) row.push_back(parse_double(f));
    if (row.size() != lines.size()) {
      throw Error(ErrorCode::ArityMismatch, where(path, li + 1) + ": confusion matrix is not square");
    }
    rows.push_back(std::move(row));
  }
  return validate_confusion(rows, tolerance);
}

void save_confusion(const std::filesystem::path& path, const ConfusionMatrix& c) {
  std::string out;
  for (std::size_t r = 0; r < c.size(); ++r) {
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (t) out += ',';
      out += format_double(c.at(r, t));
    }
    out += '\n';
  }
  write_text(path, out);
}

ProbVector load_prob_vector(const std::filesystem::path& path, double tolerance) {
  const auto lines = lines_of(read_text(path));
  if (lines.size() != 1) throw Error(ErrorCode::MalformedInput, path.string() + ": expected one row");
  std::vector<double> v;
  for (const auto& f : split_fields(lines[0])) v.push_back(parse_double(f));
  return ProbVector::make(std::move(v), tolerance);
}

void save_prob_vector(const std::filesystem::path& path, const ProbVector& f) {
  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out += ',';
    out += format_double(f[i]);
  }
  write_text(path, out + '\n');
}

TopKCalibrator load_calibrator(const std::filesystem::path& path) {
  const auto lines = lines_of(read_text(path));
  if (lines.empty() || lines[0] != "rank,bin,lower,upper,value") {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": expected rank,bin,lower,upper,value");
  }
  std::vector<std::vector<double>> edges;
  std::vector<std::vector<double>> values;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li]);
    if (f.size() != 5) throw Error(ErrorCode::ArityMismatch, where(path, li + 1));
    const std::size_t rank = parse_size(f[0]);
    const std::size_t bin = parse_size(f[1]);
    if (rank == edges.size()) {
      edges.emplace_back();
      values.emplace_back();
    }
    if (rank + 1 != edges.size() || bin != values.back().size()) {
      throw Error(ErrorCode::MalformedInput, where(path, li + 1) + ": rows out of order");
    }
    const double lower = parse_double(f[2]);
    if (bin == 0) {
      edges.back().push_back(lower);
    } else if (lower != edges.back().back()) {
      throw Error(ErrorCode::MalformedInput, where(path, li + 1) + ": bins not contiguous");
    }
    edges.back().push_back(parse_double(f[3]));
    values.back().push_back(parse_double(f[4]));
  }
  return TopKCalibrator(std::move(edges), std::move(values));
}

void save_calibrator(const std::filesystem::path& path, const TopKCalibrator& cal) {
  std::string out = "rank,bin,lower,upper,value\n";
  for (std::size_t j = 0; j < cal.k(); ++j) {
    const auto e = cal.edges(j);
    const auto v = cal.values(j);
    for (std::size_t b = 0; b < v.size(); ++b) {
      out += std::to_string(j) + ',' + std::to_string(b) + ',' + format_double(e[b]) + ',' +
             format_double(e[b + 1]) + ',' + format_double(v[b]) + '\n';
    }
  }
  write_text(path, out);
}

void write_results(const std::filesystem::path& path, std::vector<ResultRecord> records) {
  std::sort(records.begin(), records.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return std::tie(a.method, a.config_hash, a.run, a.metric) <
           std::tie(b.method, b.config_hash, b.run, b.metric);
  });
  std::string out = "method,config_hash,run,metric,value\n";
  for (const auto& r : records) {
    out += r.method + ',' + r.config_hash + ',' + std::to_string(r.run) + ',' + r.metric + ',' +
           format_double(r.value) + '\n';
  }
  write_text(path, out);
}

std::vector<ResultRecord> read_results(const std::filesystem::path& path) {
  const auto lines = lines_of(read_text(path));
  if (lines.empty() || lines[0] != "method,config_hash,run,metric,value") {
    throw Error(ErrorCode::MalformedHeader, path.string());
  }
  std::vector<ResultRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li]);
    if (f.size() != 5) throw Error(ErrorCode::ArityMismatch, where(path, li + 1));
    out.push_back({f[0], f[1], parse_size(f[2]), f[3], parse_double(f[4])});
  }
  return out;
}

void write_instances(const std::filesystem::path& path, const std::vector<InstanceResult>& rows) {
  std::string out = "method,config_hash,run,id,true_label,confuser,set,accuracy\n";
  for (const auto& r : rows) {
    out += r.method + ',' + r.config_hash + ',' + std::to_string(r.run) + ',' + r.id + ',' +
           std::to_string(r.true_label) + ',' + std::to_string(r.confuser) + ',' +
           r.set.to_field() + ',' + format_double(r.accuracy) + '\n';
  }
  write_text(path, out);
}

std::vector<InstanceResult> read_instances(const std::filesystem::path& path) {
  const auto lines = lines_of(read_text(path));
  if (lines.empty() || lines[0] != "method,config_hash,run,id,true_label,confuser,set,accuracy") {
    throw Error(ErrorCode::MalformedHeader, path.string());
  }
  std::vector<InstanceResult> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li]);
    if (f.size() != 8) throw Error(ErrorCode::ArityMismatch, where(path, li + 1));
    InstanceResult r;
    r.method = f[0];
    r.config_hash = f[1];
    r.run = parse_size(f[2]);
    r.id = f[3];
    r.true_label = parse_size(f[4]);
    r.confuser = parse_size(f[5]);
    std::vector<LabelId> members;
    for (const auto& m : split_fields(f[6], ' ')) {
      if (!m.empty()) members.push_back(parse_size(m));
    }
    r.set = PredictionSet(std::move(members));
    r.accuracy = parse_double(f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace predset
