#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lpcsvrg/comm.hpp"
#include "lpcsvrg/rng.hpp"

namespace lpcsvrg {

enum class ExecMode { Serial, ThreadPerWorker };

// Everything a worker owns is value-typed, so a copied cluster is a snapshot
// that replays identically.
struct WorkerState {
  int id = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;
  std::vector<double> u;        // local gradient estimate for the next exchange
  std::vector<double> scratch;
  std::vector<std::size_t> batch;
  RngStream quant_rng;        // rounding lanes, unique per worker
  RngStream batch_rng;        // mini-batch sampling, unique per worker
  RngStream shared_batch_rng; // identical key on every worker: no comm needed
};

struct ClusterState {
  int workers = 0;
  std::size_t dim = 0;
  CommScheme scheme = CommScheme::Broadcast;
  ExecMode exec = ExecMode::Serial;
  uint64_t master_seed = 0;
  std::vector<WorkerState> local;
  RngStream server_rng;
  RngStream output_rng;
  BitLedger ledger;
};

ClusterState spawn_cluster(int workers, std::size_t dim, CommScheme scheme,
                           uint64_t master_seed);

// Runs fn once per worker and returns after all complete (a barrier). Serial
// mode iterates in worker order; thread mode runs one std::thread per worker.
// Workers may only touch their own state plus read-only shared data, so both
// modes produce bit-identical results. A throwing worker surfaces as
// WorkerPanic with the lowest failing id, after every worker has finished.
void barrier_step(ClusterState& cluster, const std::function<void(WorkerState&)>& fn);

// Convenience: pointers to each worker's quant stream, in worker order.
std::vector<RngStream*> quant_streams(ClusterState& cluster);

}  // namespace lpcsvrg
