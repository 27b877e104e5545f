#include "lpcsvrg/simnet.hpp"

#include <exception>
#include <thread>

#include "lpcsvrg/errors.hpp"

namespace lpcsvrg {

ClusterState spawn_cluster(int workers, std::size_t dim, CommScheme scheme,
                           uint64_t master_seed) {
  if (workers < 1) throw ConfigInvalid("cluster.N: must be >= 1");
  if (dim == 0) throw ConfigInvalid("cluster: dim must be >= 1");
  ClusterState c;
  c.workers = workers;
  c.dim = dim;
  c.scheme = scheme;
  c.master_seed = master_seed;
  c.server_rng = derive_stream(master_seed, kSharedWorker, StreamPurpose::Server);
  c.output_rng = derive_stream(master_seed, kSharedWorker, StreamPurpose::OutputChoice);
  c.local.resize(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) {
    WorkerState& w = c.local[static_cast<std::size_t>(i)];
    w.id = i;
    w.x.assign(dim, 0.0);
    w.y.assign(dim, 0.0);
    w.z.assign(dim, 0.0);
    w.u.assign(dim, 0.0);
    w.scratch.assign(dim, 0.0);
    const auto wid = static_cast<uint32_t>(i);
    w.quant_rng = derive_stream(master_seed, wid, StreamPurpose::Quantize);
    w.batch_rng = derive_stream(master_seed, wid, StreamPurpose::Batch);
    w.shared_batch_rng = derive_stream(master_seed, kSharedWorker, StreamPurpose::SharedBatch);
  }
  return c;
}

void barrier_step(ClusterState& cluster, const std::function<void(WorkerState&)>& fn) {
  const std::size_t n = cluster.local.size();
  std::vector<std::exception_ptr> failures(n);
  if (cluster.exec == ExecMode::Serial) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(cluster.local[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      pool.emplace_back([&, i] {
        try {
          fn(cluster.local[i]);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const std::exception& e) {
      throw WorkerPanic(static_cast<int>(i), e.what());
    } catch (...) {
      throw WorkerPanic(static_cast<int>(i), "unknown error");
    }
  }
}

std::vector<RngStream*> quant_streams(ClusterState& cluster) {
  std::vector<RngStream*> out;
  out.reserve(cluster.local.size());
  for (auto& w : cluster.local) out.push_back(&w.quant_rng);
  return out;
}

}  // namespace lpcsvrg
