#include "macrocast/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "macrocast/errors.hpp"

namespace macrocast {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string strip_quotes(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

struct Row {
  Period period;
  double value;
  std::size_t line;
};

}  // namespace

std::vector<TimeSeries> ingest_csv(std::string_view text, Unit unit) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "period" || fields[1] != "series_id" || fields[2] != "value")
        throw DataError("row " + std::to_string(line_no) + ": expected header 'period,series_id,value'");
      header_seen = true;
      continue;
    }
    const auto where = "row " + std::to_string(line_no) + ": ";
    if (fields.size() != 3)
      throw DataError(where + "expected 3 fields, got " + std::to_string(fields.size()));
    Period p;
    try {
      p = Period::parse(fields[0]);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    auto id = strip_quotes(fields[1]);
    if (id.empty()) throw DataError(where + "empty series_id");
    double v = 0.0;
    auto vf = fields[2];
    auto [ptr, ec] = std::from_chars(vf.data(), vf.data() + vf.size(), v);
    if (vf.empty() || ec != std::errc() || ptr != vf.data() + vf.size() || !std::isfinite(v))
      throw DataError(where + "non-numeric value '" + std::string(vf) + "'");
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(Row{p, v, line_no});
  }
  if (!header_seen || rows.empty()) throw DataError("no rows");

  std::vector<TimeSeries> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& rs = rows[id];
    std::stable_sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.period < b.period; });
    Eigen::VectorXd values(static_cast<Eigen::Index>(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (i > 0) {
        const auto step = quarters_between(rs[i - 1].period, rs[i].period);
        if (step == 0)
          throw DataError("row " + std::to_string(std::max(rs[i].line, rs[i - 1].line)) + ": duplicate (" +
                          rs[i].period.to_string() + ", " + id + ")");
        if (step > 1)
          throw DataError("row " + std::to_string(rs[i].line) + ": gap in series '" + id + "' between " +
                          rs[i - 1].period.to_string() + " and " + rs[i].period.to_string() + " (missing " +
                          rs[i - 1].period.successor().to_string() + ")");
      }
      values[static_cast<Eigen::Index>(i)] = rs[i].value;
    }
    out.emplace_back(id, unit, rs.front().period, std::move(values));
  }
  return out;
}

std::vector<TimeSeries> ingest_csv_file(const std::string& path, Unit unit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ingest_csv(buf.str(), unit);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& os, const std::vector<TimeSeries>& series) {
  os << "period,series_id,value\n";
  for (const auto& s : series)
    for (Eigen::Index i = 0; i < s.size(); ++i)
      os << s.period(i).to_string() << ',' << s.id() << ',' << format_double(s[i]) << '\n';
}

std::string to_csv(const std::vector<TimeSeries>& series) {
  std::ostringstream os;
  write_csv(os, series);
  return os.str();
}

}  // namespace macrocast
