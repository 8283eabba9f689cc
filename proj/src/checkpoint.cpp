#include "nowcast/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace nowcast {

namespace {

constexpr char kMagic[4] = {'N', 'W', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int64_t get_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (Index d : t.shape()) put_i64(out, d);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

void get_tensor_into(std::istream& in, Tensor& t, const char* what) {
  const std::uint32_t nd = get_u32(in);
  std::vector<Index> shape(nd);
  for (auto& d : shape) d = get_i64(in);
  if (!in) throw std::runtime_error(std::string("checkpoint: truncated ") + what);
  if (shape != t.shape())
    throw std::runtime_error(std::string("checkpoint: shape mismatch for ") + what);
  in.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!in) throw std::runtime_error(std::string("checkpoint: truncated ") + what);
}

void put_meta(std::ostream& out, const CheckpointMeta& m) {
  put_u64(out, m.config_hash);
  put_i64(out, m.epoch);
  put_f64(out, m.best_val_loss);
  put_i64(out, m.best_epoch);
  put_f64(out, m.learning_rate);
  put_i64(out, m.epochs_since_improvement);
  put_i64(out, m.epochs_since_lr_drop);
}

CheckpointMeta get_meta(std::istream& in) {
  CheckpointMeta m;
  m.config_hash = get_u64(in);
  m.epoch = get_i64(in);
  m.best_val_loss = get_f64(in);
  m.best_epoch = get_i64(in);
  m.learning_rate = get_f64(in);
  m.epochs_since_improvement = get_i64(in);
  m.epochs_since_lr_drop = get_i64(in);
  return m;
}

void check_header(std::istream& in, const std::string& path) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model,
                     const nn::Adam* optimizer, const CheckpointMeta& meta) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_meta(out, meta);

    const auto params = model.params();
    const auto buffers = model.buffers();
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const nn::Param* p : params) put_tensor(out, p->value);
    put_u32(out, static_cast<std::uint32_t>(buffers.size()));
    for (const nn::Param* b : buffers) put_tensor(out, b->value);

    if (optimizer) {
      put_u32(out, 1);
      put_i64(out, optimizer->step_count());
      auto& opt = const_cast<nn::Adam&>(*optimizer);
      for (const Tensor& m : opt.slots_m()) put_tensor(out, m);
      for (const Tensor& v : opt.slots_v()) put_tensor(out, v);
    } else {
      put_u32(out, 0);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("checkpoint: cannot rename into " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, Model& model,
                               nn::Adam* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  check_header(in, path);
  const CheckpointMeta meta = get_meta(in);

  const auto params = model.params();
  const auto buffers = model.buffers();
  if (get_u32(in) != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
  for (nn::Param* p : params) get_tensor_into(in, p->value, p->name.c_str());
  if (get_u32(in) != buffers.size())
    throw std::runtime_error("checkpoint: buffer count mismatch in " + path);
  for (nn::Param* b : buffers) get_tensor_into(in, b->value, "buffer");

  const std::uint32_t has_opt = get_u32(in);
  if (optimizer) {
    if (!has_opt)
      throw std::runtime_error("checkpoint: no optimizer state in " + path);
    optimizer->set_step_count(get_i64(in));
    if (optimizer->slots_m().size() != params.size())
      throw std::runtime_error("checkpoint: optimizer slot mismatch in " + path);
    for (Tensor& m : optimizer->slots_m()) get_tensor_into(in, m, "adam.m");
    for (Tensor& v : optimizer->slots_v()) get_tensor_into(in, v, "adam.v");
  }
  return meta;
}

std::uint64_t peek_checkpoint_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  check_header(in, path);
  return get_u64(in);
}

}  // namespace nowcast
