#include "nowcast/dataset.hpp"

#include <stdexcept>

namespace nowcast {

Dataset::Dataset(const Corpus& corpus, const DatasetManifest& manifest,
                 Split split, KrigeCache* krige_cache, KrigeConfig krige_config)
    : corpus_(&corpus),
      samples_(manifest.split_samples(split)),
      stats_(manifest.stats),
      cache_(krige_cache),
      krige_config_(krige_config) {
  station_positions_.reserve(corpus.stations.stations.size());
  for (const StationMeta& s : corpus.stations.stations)
    station_positions_.push_back(s.position);
}

Tensor Dataset::krige_stack(size_t index) const {
  const SampleRef& ref = samples_.at(index);
  Tensor stack;
  if (cache_ && cache_->load(ref.id, stack)) {
    stack.reshape({kNumLags * kNumVariables, kGridSize, kGridSize});
    return stack;
  }
  MaterializedSample s = materialize_sample(*corpus_, ref, stats_);
  KrigeStack built = build_krige_stack(s.station.data, kNumStations,
                                       kNumVariables, kNumLags,
                                       station_positions_, krige_config_);
  if (cache_) cache_->store(ref.id, built.maps);
  built.maps.reshape({kNumLags * kNumVariables, kGridSize, kGridSize});
  return std::move(built.maps);
}

ForwardBatch Dataset::batch(const std::vector<size_t>& indices,
                            bool want_station, bool want_krige) const {
  const Index B = static_cast<Index>(indices.size());
  if (B == 0) throw std::invalid_argument("Dataset::batch: empty index list");

  ForwardBatch out;
  out.precip = Tensor({B, kNumLags, kGridSize, kGridSize});
  out.target = Tensor({B, 1, kGridSize, kGridSize});
  if (want_station) out.station = Tensor({B, kNumStations, kNumVariables, kNumLags});
  if (want_krige)
    out.krige = Tensor({B, kNumLags * kNumVariables, kGridSize, kGridSize});

  constexpr Index kPix = kGridSize * kGridSize;
  for (Index n = 0; n < B; ++n) {
    const size_t idx = indices[static_cast<size_t>(n)];
    MaterializedSample s = materialize_sample(*corpus_, samples_.at(idx), stats_);
    for (Index lag = 0; lag < kNumLags; ++lag)
      std::copy(s.inputs[static_cast<size_t>(lag)].data(),
                s.inputs[static_cast<size_t>(lag)].data() + kPix,
                out.precip.data() + (n * kNumLags + lag) * kPix);
    std::copy(s.target.data(), s.target.data() + kPix,
              out.target.data() + n * kPix);
    if (want_station) {
      float* dst = out.station.data() +
                   n * kNumStations * kNumVariables * kNumLags;
      for (size_t i = 0; i < s.station.data.size(); ++i)
        dst[i] = static_cast<float>(s.station.data[i]);
    }
    if (want_krige) {
      Tensor stack = krige_stack(idx);
      std::copy(stack.data(), stack.data() + stack.numel(),
                out.krige.data() + n * stack.numel());
    }
  }
  return out;
}

}  // namespace nowcast
