#pragma once

#include "nowcast/krige_cache.hpp"
#include "nowcast/kriging.hpp"
#include "nowcast/models.hpp"
#include "nowcast/pipeline.hpp"

#include <vector>

namespace nowcast {

/// One split of the manifest, bound to an in-memory corpus, serving
/// materialized minibatches. Kriged stacks are computed on demand from the
/// standardized station tensor and memoized through the optional cache.
class Dataset {
 public:
  Dataset(const Corpus& corpus, const DatasetManifest& manifest, Split split,
          KrigeCache* krige_cache = nullptr,
          KrigeConfig krige_config = KrigeConfig{});

  size_t size() const { return samples_.size(); }
  const std::vector<SampleRef>& samples() const { return samples_; }
  const StandardizationStats& stats() const { return stats_; }

  /// Materializes the given sample indices into one batch. Station and
  /// krige tensors are filled only when requested.
  ForwardBatch batch(const std::vector<size_t>& indices, bool want_station,
                     bool want_krige) const;

  /// (96, 64, 64) lag-major stack for one sample, via the cache if bound.
  Tensor krige_stack(size_t index) const;

 private:
  const Corpus* corpus_;
  std::vector<SampleRef> samples_;
  StandardizationStats stats_;
  KrigeCache* cache_;
  KrigeConfig krige_config_;
  std::vector<LatLon> station_positions_;
};

}  // namespace nowcast
