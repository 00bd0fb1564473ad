#include "slipctl/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace slipctl {
namespace {

const char* kHeader =
    "controller,n_basis,trials,drops,rov_mean,rov_std,mor_mean,mor_std,et_mean,et_std,rts_mean,rts_std,drt_mean,"
    "drt_std";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

template <class T>
T parse_number(const std::string& text, long line) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw std::runtime_error("metrics csv line " + std::to_string(line) + ": '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

TrialMetrics compute_metrics(const TrialLog& log, const ReferenceProfile& ref) {
  TrialMetrics m;
  m.dropped = log.meta.dropped;
  double et_sum = 0.0;
  int et_count = 0;
  double rov_sum = 0.0;
  for (std::size_t k = 0; k < log.records.size(); ++k) {
    const auto& r = log.records[k];
    m.mor = std::max(m.mor, std::abs(r.theta));
    m.rts += slip_label(r.theta);
    m.drt += std::abs(r.cmd - ref.at(long(k)));
    if (r.et_ms) {
      et_sum += *r.et_ms;
      ++et_count;
    }
    if (r.rov && r.status && *r.status == "converged") {
      rov_sum += *r.rov;
      ++m.converged_ticks;
    }
  }
  m.et_ms = et_count ? et_sum / et_count : 0.0;
  m.rov = m.converged_ticks ? rov_sum / m.converged_ticks : 0.0;
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  double mean = 0.0, m2 = 0.0;
  long n = 0;
  for (double x : values) {
    ++n;
    const double delta = x - mean;
    mean += delta / double(n);
    m2 += delta * (x - mean);
  }
  return {mean, n > 1 ? std::sqrt(std::max(0.0, m2 / double(n - 1))) : 0.0};
}

MeanStd mean_std_two_pass(std::span<const double> values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double x : values) sum += x;
  const double mean = sum / double(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(values.size() - 1))};
}

MetricsRow aggregate(const std::string& controller, int n_basis, std::span<const TrialMetrics> trials) {
  if (trials.empty()) throw std::invalid_argument("aggregate: no trials");
  MetricsRow row;
  row.controller = controller;
  row.n_basis = n_basis;
  row.trials = int(trials.size());
  std::vector<double> rov, mor, et, rts, drt;
  for (const auto& t : trials) {
    row.drops += t.dropped;
    if (t.converged_ticks > 0) rov.push_back(t.rov);
    mor.push_back(t.mor);
    et.push_back(t.et_ms);
    rts.push_back(double(t.rts));
    drt.push_back(t.drt);
  }
  row.rov = mean_std(rov);
  row.mor = mean_std(mor);
  row.et = mean_std(et);
  row.rts = mean_std(rts);
  row.drt = mean_std(drt);
  return row;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  std::ostringstream buf;
  buf.precision(17);
  buf << kHeader << '\n';
  for (const auto& r : rows) {
    buf << quote(r.controller) << ',' << r.n_basis << ',' << r.trials << ',' << r.drops;
    for (const MeanStd* s : {&r.rov, &r.mor, &r.et, &r.rts, &r.drt}) buf << ',' << s->mean << ',' << s->std;
    buf << '\n';
  }
  out << buf.str();
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw std::runtime_error("metrics csv line 1: unexpected header");

  std::vector<MetricsRow> rows;
  long number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 14) {
      throw std::runtime_error("metrics csv line " + std::to_string(number) + ": expected 14 fields, got " +
                               std::to_string(cells.size()));
    }
    MetricsRow r;
    r.controller = cells[0];
    r.n_basis = parse_number<int>(cells[1], number);
    r.trials = parse_number<int>(cells[2], number);
    r.drops = parse_number<int>(cells[3], number);
    std::size_t c = 4;
    for (MeanStd* s : {&r.rov, &r.mor, &r.et, &r.rts, &r.drt}) {
      s->mean = parse_number<double>(cells[c++], number);
      s->std = parse_number<double>(cells[c++], number);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace slipctl
