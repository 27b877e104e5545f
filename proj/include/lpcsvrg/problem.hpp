#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lpcsvrg/rng.hpp"

namespace lpcsvrg {

enum class ProxKind { Zero, L1, L2Squared, Box };

// Nonsmooth term h with an exact proximal map:
//   zero  h = 0                    prox = identity
//   l1    h = mu |x|_1             soft-threshold
//   l2sq  h = (sigma/2) |x|^2      v / (1 + eta sigma)
//   box   h = indicator[lo, hi]    clamp
class NonsmoothTerm {
 public:
  static NonsmoothTerm zero();
  static NonsmoothTerm l1(double mu);
  static NonsmoothTerm l2_squared(double sigma);
  static NonsmoothTerm box(double lo, double hi);

  void prox_into(double eta, std::span<const double> v, std::span<double> out) const;
  std::vector<double> prox(double eta, std::span<const double> v) const;
  double value(std::span<const double> x) const;
  double strong_convexity() const { return kind_ == ProxKind::L2Squared ? sigma_ : 0.0; }
  ProxKind kind() const { return kind_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  ProxKind kind_ = ProxKind::Zero;
  double mu_ = 0.0;
  double sigma_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;  // row-major n x d
  std::vector<double> targets;
  std::string provenance;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
  uint64_t content_hash() const;  // FNV-1a over shape + raw bytes
};

// Rows i.i.d. standard normal, targets a_i . x_star + noise * eps_i.
Dataset make_synthetic_dataset(std::size_t d, std::size_t n, double noise, uint64_t seed);

// Text format "label idx:val idx:val ...", 1-based indices; dimension is
// inferred from the highest index. Throws ParseError with the offending line
// number, EmptyDataset when no samples.
Dataset load_libsvm(const std::string& path);
Dataset parse_libsvm(const std::string& text, const std::string& provenance);

// Least-squares composite objective over a dataset:
//   f_i(x) = 1/2 (a_i . x - b_i)^2,  P = (1/n) sum f_i + h,
// with smoothness L = max_i |a_i|^2.
class CompositeProblem {
 public:
  CompositeProblem(std::shared_ptr<const Dataset> data, NonsmoothTerm h);

  std::size_t n() const { return data_->n; }
  std::size_t d() const { return data_->d; }
  double smoothness() const { return L_; }
  const NonsmoothTerm& h() const { return h_; }
  const Dataset& data() const { return *data_; }

  // acc += w * grad f_i(x)
  void add_sample_grad(std::size_t i, std::span<const double> x, double w,
                       std::span<double> acc) const;
  void full_grad_into(std::span<const double> x, std::span<double> out) const;
  std::vector<double> full_grad(std::span<const double> x) const;

  // out = (1/B) sum over batch of [grad f_a(x) - grad f_a(x_tilde)]
  void batch_grad_diff(std::span<const std::size_t> batch, std::span<const double> x,
                       std::span<const double> x_tilde, std::span<double> out) const;

  double smooth_loss(std::span<const double> x) const;
  double objective(std::span<const double> x) const { return smooth_loss(x) + h_.value(x); }

 private:
  std::shared_ptr<const Dataset> data_;
  NonsmoothTerm h_;
  double L_ = 0.0;
};

// G_eta(x) = (x - prox_{eta h}(x - eta grad f(x))) / eta
std::vector<double> gradient_mapping(const CompositeProblem& p, std::span<const double> x,
                                     double eta);

struct SyntheticProblem {
  std::shared_ptr<const Dataset> data;
  std::vector<double> x_star;
};

SyntheticProblem make_synthetic(std::size_t d, std::size_t n, double noise, uint64_t seed);

}  // namespace lpcsvrg
