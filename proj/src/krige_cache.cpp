#include "nowcast/krige_cache.hpp"

#include "nowcast/radar_io.hpp"

#include <filesystem>

namespace nowcast {

KrigeCache::KrigeCache(std::string dir, std::uint64_t config_hash)
    : dir_(std::move(dir)), hash_(config_hash) {
  std::filesystem::create_directories(dir_);
}

std::string KrigeCache::path_for(const std::string& sample_id) const {
  std::string name = sample_id;
  for (char& c : name)
    if (c == ':' || c == '/') c = '_';
  return (std::filesystem::path(dir_) / (name + ".nwf")).string();
}

bool KrigeCache::load(const std::string& sample_id, Tensor& out) const {
  const std::string path = path_for(sample_id);
  if (!std::filesystem::exists(path)) return false;
  std::vector<Index> shape;
  std::uint64_t stored_hash = 0;
  std::vector<float> data;
  try {
    data = read_float_array(path, shape, stored_hash);
  } catch (const std::exception&) {
    return false;  // corrupt entry: recompute
  }
  if (stored_hash != hash_) return false;
  out = Tensor(shape);
  std::copy(data.begin(), data.end(), out.data());
  return true;
}

void KrigeCache::store(const std::string& sample_id, const Tensor& maps) const {
  write_float_array(path_for(sample_id), maps.shape(), maps.data(), hash_);
}

}  // namespace nowcast
