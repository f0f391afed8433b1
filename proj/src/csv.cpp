#include "thermo/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace thermo {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("bad numeric field for ") + what +
                             ": '" + s + "'");
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

} // namespace

void write_truth_csv(const std::filesystem::path& path,
                     const TruthSeries& series) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "t_s,q_kg_s\n";
  for (size_t i = 0; i < series.q.size(); ++i)
    f << format_double(series.times[i]) << ',' << format_double(series.q[i])
      << '\n';
}

TruthCsv read_truth_csv(const std::filesystem::path& path) {
  std::ifstream f = open_or_throw(path);
  std::string line;
  if (!std::getline(f, line) || split_line(line) != std::vector<std::string>{
                                    "t_s", "q_kg_s"})
    throw std::runtime_error("unexpected truth CSV header in " + path.string());
  TruthCsv out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 2)
      throw std::runtime_error("malformed truth CSV row in " + path.string());
    out.times.push_back(parse_double(cells[0], "t_s"));
    out.q.push_back(parse_double(cells[1], "q_kg_s"));
  }
  if (out.q.size() < 2)
    throw std::runtime_error("truth CSV has fewer than 2 rows: " + path.string());
  return out;
}

static const char* kAnalysisHeader =
    "cycle,t_s,q_truth,q_obs,xb1,xb2,xb3,xa1,xa2,xa3,scaled_bg_err,bv_growth";

void write_analysis_csv(const std::filesystem::path& path,
                        const std::vector<AnalysisRecord>& records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << kAnalysisHeader << '\n';
  for (const AnalysisRecord& r : records) {
    f << r.cycle << ',' << format_double(r.t_s) << ','
      << format_double(r.q_truth) << ',' << format_double(r.q_obs);
    for (int i = 0; i < 3; ++i) f << ',' << format_double(r.x_background[i]);
    for (int i = 0; i < 3; ++i) f << ',' << format_double(r.x_analysis[i]);
    f << ',' << format_double(r.scaled_bg_error) << ',';
    if (r.bv_growth) f << format_double(*r.bv_growth);
    f << '\n';
  }
}

std::vector<AnalysisRecord> read_analysis_csv(
    const std::filesystem::path& path) {
  std::ifstream f = open_or_throw(path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error("empty analysis CSV: " + path.string());
  {
    auto cells = split_line(line);
    std::ostringstream joined;
    for (size_t i = 0; i < cells.size(); ++i)
      joined << (i ? "," : "") << cells[i];
    if (joined.str() != kAnalysisHeader)
      throw std::runtime_error("unexpected analysis CSV header in " +
                               path.string());
  }
  std::vector<AnalysisRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto c = split_line(line);
    if (c.size() != 12)
      throw std::runtime_error("malformed analysis CSV row in " + path.string());
    AnalysisRecord r;
    r.cycle = static_cast<long>(parse_double(c[0], "cycle"));
    r.t_s = parse_double(c[1], "t_s");
    r.q_truth = parse_double(c[2], "q_truth");
    r.q_obs = parse_double(c[3], "q_obs");
    for (int i = 0; i < 3; ++i) r.x_background[i] = parse_double(c[4 + i], "xb");
    for (int i = 0; i < 3; ++i) r.x_analysis[i] = parse_double(c[7 + i], "xa");
    r.scaled_bg_error = parse_double(c[10], "scaled_bg_err");
    if (!c[11].empty()) r.bv_growth = parse_double(c[11], "bv_growth");
    out.push_back(r);
  }
  return out;
}

void write_sweep_csv(
    const std::filesystem::path& path,
    const std::vector<std::tuple<std::string, double, double>>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "filter,window_s,scaled_bg_rmse\n";
  for (const auto& [filter, window, rmse] : rows)
    f << filter << ',' << format_double(window) << ',' << format_double(rmse)
      << '\n';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

} // namespace thermo
