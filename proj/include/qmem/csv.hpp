#pragma once

// CSV I/O: header row, comma separated, numbers written with %.9g.

#include <iosfwd>
#include <string>
#include <vector>

#include "qmem/estimation.hpp"
#include "qmem/scan.hpp"

namespace qmem::csv {

std::string format_number(double value);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

// t_us,amplitude[,sigma]
void write_curve(std::ostream& out, const RetrievalCurve& curve, bool with_sigma);
// Accepts the header produced by write_curve; a third column is read as sigma.
RetrievalCurve read_curve(std::istream& in);

// x,a_max,a_min,r
void write_scan(std::ostream& out, const std::vector<ScanRow>& rows);

}  // namespace qmem::csv
