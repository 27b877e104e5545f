#include "lpcsvrg/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "lpcsvrg/errors.hpp"
#include "lpcsvrg/vec.hpp"

namespace lpcsvrg {

NonsmoothTerm NonsmoothTerm::zero() { return {}; }

NonsmoothTerm NonsmoothTerm::l1(double mu) {
  if (mu < 0.0) throw ConfigInvalid("h.mu: must be >= 0");
  NonsmoothTerm h;
  h.kind_ = ProxKind::L1;
  h.mu_ = mu;
  return h;
}

NonsmoothTerm NonsmoothTerm::l2_squared(double sigma) {
  if (sigma < 0.0) throw ConfigInvalid("h.sigma: must be >= 0");
  NonsmoothTerm h;
  h.kind_ = ProxKind::L2Squared;
  h.sigma_ = sigma;
  return h;
}

NonsmoothTerm NonsmoothTerm::box(double lo, double hi) {
  if (lo > hi) throw ConfigInvalid("h.box: lo must be <= hi");
  NonsmoothTerm h;
  h.kind_ = ProxKind::Box;
  h.lo_ = lo;
  h.hi_ = hi;
  return h;
}

void NonsmoothTerm::prox_into(double eta, std::span<const double> v,
                              std::span<double> out) const {
  if (out.size() != v.size()) throw DimMismatch("prox: output size != input size");
  switch (kind_) {
    case ProxKind::Zero:
      std::copy(v.begin(), v.end(), out.begin());
      return;
    case ProxKind::L1: {
      const double t = eta * mu_;
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double x = v[j];
        out[j] = x > t ? x - t : (x < -t ? x + t : 0.0);
      }
      return;
    }
    case ProxKind::L2Squared: {
      const double c = 1.0 / (1.0 + eta * sigma_);
      for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] * c;
      return;
    }
    case ProxKind::Box:
      for (std::size_t j = 0; j < v.size(); ++j) out[j] = std::clamp(v[j], lo_, hi_);
      return;
  }
}

std::vector<double> NonsmoothTerm::prox(double eta, std::span<const double> v) const {
  std::vector<double> out(v.size());
  prox_into(eta, v, out);
  return out;
}

double NonsmoothTerm::value(std::span<const double> x) const {
  switch (kind_) {
    case ProxKind::Zero:
      return 0.0;
    case ProxKind::L1: {
      double s = 0.0;
      for (double v : x) s += std::fabs(v);
      return mu_ * s;
    }
    case ProxKind::L2Squared:
      return 0.5 * sigma_ * vec::norm_sq(x);
    case ProxKind::Box:
      for (double v : x)
        if (v < lo_ || v > hi_) return std::numeric_limits<double>::infinity();
      return 0.0;
  }
  return 0.0;
}

uint64_t Dataset::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  const uint64_t shape[2] = {n, d};
  mix(shape, sizeof(shape));
  mix(features.data(), features.size() * sizeof(double));
  mix(targets.data(), targets.size() * sizeof(double));
  return h;
}

namespace {

Dataset synth_impl(std::size_t d, std::size_t n, double noise, uint64_t seed,
                   std::vector<double>* x_star_out) {
  if (d == 0 || n == 0) throw ConfigInvalid("dataset: d and n must be >= 1");
  RngStream rng = derive_stream(seed, kSharedWorker, StreamPurpose::DataGen);
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.features.resize(n * d);
  ds.targets.resize(n);
  std::vector<double> x_star(d);
  for (auto& v : x_star) v = rng.next_gaussian();
  for (auto& v : ds.features) v = rng.next_gaussian();
  for (std::size_t i = 0; i < n; ++i)
    ds.targets[i] = vec::dot(ds.row(i), x_star) + noise * rng.next_gaussian();
  std::ostringstream tag;
  tag << "synthetic(d=" << d << ",n=" << n << ",noise=" << noise << ",seed=" << seed << ")";
  ds.provenance = tag.str();
  if (x_star_out) *x_star_out = std::move(x_star);
  return ds;
}

}  // namespace

Dataset make_synthetic_dataset(std::size_t d, std::size_t n, double noise, uint64_t seed) {
  return synth_impl(d, n, noise, seed, nullptr);
}

SyntheticProblem make_synthetic(std::size_t d, std::size_t n, double noise, uint64_t seed) {
  SyntheticProblem sp;
  sp.data = std::make_shared<Dataset>(synth_impl(d, n, noise, seed, &sp.x_star));
  return sp;
}

Dataset parse_libsvm(const std::string& text, const std::string& provenance) {
  struct RawRow {
    double target;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<RawRow> rows;
  std::size_t max_index = 0;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    std::istringstream ls(line);
    RawRow row{};
    if (!(ls >> row.target)) throw ParseError(line_no, "expected numeric label");
    std::string tok;
    while (ls >> tok) {
      const std::size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 >= tok.size())
        throw ParseError(line_no, "expected index:value, got \"" + tok + "\"");
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoull(tok.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad feature index in \"" + tok + "\"");
      }
      if (idx == 0) throw ParseError(line_no, "feature indices are 1-based");
      double val = 0.0;
      try {
        std::size_t used = 0;
        val = std::stod(tok.substr(colon + 1), &used);
        if (used != tok.size() - colon - 1) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError(line_no, "bad feature value in \"" + tok + "\"");
      }
      row.entries.emplace_back(idx, val);
      max_index = std::max(max_index, idx);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset("dataset: no samples");
  if (max_index == 0) throw EmptyDataset("dataset: no features");
  Dataset ds;
  ds.n = rows.size();
  ds.d = max_index;
  ds.features.assign(ds.n * ds.d, 0.0);
  ds.targets.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.targets[i] = rows[i].target;
    for (const auto& [idx, val] : rows[i].entries) ds.features[i * ds.d + (idx - 1)] = val;
  }
  ds.provenance = provenance;
  return ds;
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EmptyDataset("dataset: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_libsvm(buf.str(), "libsvm(" + path + ")");
}

CompositeProblem::CompositeProblem(std::shared_ptr<const Dataset> data, NonsmoothTerm h)
    : data_(std::move(data)), h_(h) {
  if (!data_ || data_->n == 0) throw EmptyDataset("problem: empty dataset");
  for (std::size_t i = 0; i < data_->n; ++i)
    L_ = std::max(L_, vec::norm_sq(data_->row(i)));
}

void CompositeProblem::add_sample_grad(std::size_t i, std::span<const double> x, double w,
                                       std::span<double> acc) const {
  if (i >= data_->n) throw IndexOutOfRange("sample index " + std::to_string(i));
  const auto a = data_->row(i);
  const double r = vec::dot(a, x) - data_->targets[i];
  vec::axpy(w * r, a, acc);
}

void CompositeProblem::full_grad_into(std::span<const double> x, std::span<double> out) const {
  vec::fill(out, 0.0);
  const double w = 1.0 / static_cast<double>(data_->n);
  for (std::size_t i = 0; i < data_->n; ++i) add_sample_grad(i, x, w, out);
}

std::vector<double> CompositeProblem::full_grad(std::span<const double> x) const {
  std::vector<double> out(data_->d);
  full_grad_into(x, out);
  return out;
}

void CompositeProblem::batch_grad_diff(std::span<const std::size_t> batch,
                                       std::span<const double> x,
                                       std::span<const double> x_tilde,
                                       std::span<double> out) const {
  vec::fill(out, 0.0);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i : batch) {
    if (i >= data_->n) throw IndexOutOfRange("sample index " + std::to_string(i));
    const auto a = data_->row(i);
    const double r = vec::dot(a, x) - vec::dot(a, x_tilde);
    vec::axpy(w * r, a, out);
  }
}

double CompositeProblem::smooth_loss(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < data_->n; ++i) {
    const double r = vec::dot(data_->row(i), x) - data_->targets[i];
    s += 0.5 * r * r;
  }
  return s / static_cast<double>(data_->n);
}

std::vector<double> gradient_mapping(const CompositeProblem& p, std::span<const double> x,
                                     double eta) {
  if (eta <= 0.0) throw ConfigInvalid("eta: must be > 0");
  std::vector<double> step(x.size());
  p.full_grad_into(x, step);
  for (std::size_t j = 0; j < x.size(); ++j) step[j] = x[j] - eta * step[j];
  std::vector<double> prox(x.size());
  p.h().prox_into(eta, step, prox);
  for (std::size_t j = 0; j < x.size(); ++j) prox[j] = (x[j] - prox[j]) / eta;
  return prox;
}

}  // namespace lpcsvrg
