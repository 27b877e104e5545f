#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lpcsvrg {

// One row of the run stream. wall_ns is kept out of the CSV so that reruns of
// the same manifest are byte-identical; timing totals live in the manifest.
struct MetricsRecord {
  int epoch = 0;
  int inner = 0;
  double loss = 0.0;
  double grad_map_sq = 0.0;
  uint64_t cum_bits = 0;
  uint64_t d_lambda_max = 0;
  double zeta = 0.0;
  uint64_t wall_ns = 0;

  bool operator==(const MetricsRecord&) const = default;
};

// columns: epoch,inner,loss,grad_map_sq,cum_bits,d_lambda_max,zeta
// doubles printed with %.17g so parse(emit(s)) == s exactly
std::string metrics_to_csv(std::span<const MetricsRecord> records);
std::vector<MetricsRecord> metrics_from_csv(const std::string& csv);

struct Histogram {
  std::vector<double> edges;    // bins + 1 entries
  std::vector<uint64_t> counts; // bins entries; last bin right-closed
};

Histogram histogram(std::span<const double> u, int bins);
std::string histogram_to_csv(const Histogram& h);

// Cumulative bits at the first record whose loss reaches the threshold.
// Throws NotReached if no record does.
uint64_t bits_to_loss(std::span<const MetricsRecord> records, double threshold);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
std::string format_double(double v);  // %.17g

}  // namespace lpcsvrg
