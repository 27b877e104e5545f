#include "lpcsvrg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lpcsvrg/errors.hpp"

namespace lpcsvrg {

namespace {
constexpr const char* kHeader = "epoch,inner,loss,grad_map_sq,cum_bits,d_lambda_max,zeta";
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string metrics_to_csv(std::span<const MetricsRecord> records) {
  std::ostringstream os;
  os << kHeader << '\n';
  for (const auto& r : records) {
    os << r.epoch << ',' << r.inner << ',' << format_double(r.loss) << ','
       << format_double(r.grad_map_sq) << ',' << r.cum_bits << ',' << r.d_lambda_max << ','
       << format_double(r.zeta) << '\n';
  }
  return os.str();
}

std::vector<MetricsRecord> metrics_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty metrics csv");
  if (line != kHeader) throw ParseError(1, "unexpected metrics header");
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    MetricsRecord r;
    char c = 0;
    if (!(ls >> r.epoch >> c >> r.inner >> c >> r.loss >> c >> r.grad_map_sq >> c >>
          r.cum_bits >> c >> r.d_lambda_max >> c >> r.zeta))
      throw ParseError(line_no, "malformed metrics row");
    out.push_back(r);
  }
  return out;
}

Histogram histogram(std::span<const double> u, int bins) {
  if (bins < 1) throw ConfigInvalid("bins: must be >= 1");
  if (u.empty()) throw EmptyDataset("histogram: empty input");
  double lo = u[0], hi = u[0];
  for (double v : u) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + width * i;
  h.edges.back() = hi;
  if (width == 0.0) {
    h.counts[0] = u.size();  // constant vector: single occupied bin
    return h;
  }
  for (double v : u) {
    auto idx = static_cast<std::size_t>((v - lo) / width);
    if (idx >= h.counts.size()) idx = h.counts.size() - 1;  // right-closed last bin
    h.counts[idx]++;
  }
  return h;
}

std::string histogram_to_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    os << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ','
       << h.counts[i] << '\n';
  }
  return os.str();
}

uint64_t bits_to_loss(std::span<const MetricsRecord> records, double threshold) {
  for (const auto& r : records)
    if (r.loss <= threshold) return r.cum_bits;
  throw NotReached("no record reaches loss " + format_double(threshold));
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace lpcsvrg
