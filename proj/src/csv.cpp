#include "qmem/csv.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "qmem/errors.hpp"

namespace qmem::csv {

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out << ',';
    out << fields[i];
  }
  out << '\n';
}

void write_curve(std::ostream& out, const RetrievalCurve& curve, bool with_sigma) {
  write_row(out, with_sigma ? std::vector<std::string>{"t_us", "amplitude", "sigma"}
                            : std::vector<std::string>{"t_us", "amplitude"});
  for (const auto& p : curve.points()) {
    std::vector<std::string> row{format_number(p.t_us), format_number(p.amplitude)};
    if (with_sigma) row.push_back(p.sigma ? format_number(*p.sigma) : "");
    write_row(out, row);
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double to_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("csv line " + std::to_string(line_no) + ": '" + s +
                          "' is not a number");
  }
}

}  // namespace

RetrievalCurve read_curve(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<CurvePoint> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    const auto fields = split(line);
    if (!header) {
      header = true;
      if (fields.size() < 2 || fields[0] != "t_us" || fields[1] != "amplitude") {
        throw ValidationError("curve csv must start with the header t_us,amplitude[,sigma]");
      }
      continue;
    }
    if (fields.size() < 2) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": expected t_us,amplitude");
    }
    CurvePoint p{to_double(fields[0], line_no), to_double(fields[1], line_no), std::nullopt};
    if (fields.size() >= 3 && !fields[2].empty()) p.sigma = to_double(fields[2], line_no);
    points.push_back(p);
  }
  if (!header) throw ValidationError("curve csv is empty");
  return RetrievalCurve(std::move(points));
}

void write_scan(std::ostream& out, const std::vector<ScanRow>& rows) {
  write_row(out, {"x", "a_max", "a_min", "r"});
  for (const auto& r : rows) {
    write_row(out, {format_number(r.x), format_number(r.a_max), format_number(r.a_min),
                    format_number(r.r)});
  }
}

}  // namespace qmem::csv
