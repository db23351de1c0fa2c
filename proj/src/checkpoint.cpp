#include "tineuvox/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tineuvox/image.hpp"

namespace tnv {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kGridVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw io_error("truncated checkpoint");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1ull << 24)) throw parse_error("checkpoint string section implausibly large");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw io_error("truncated checkpoint");
  return s;
}

void put_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw parse_error("not a " + what + " (bad magic)");
}

void put_grid(std::ostream& os, const VoxelGrid<float>& grid) {
  put_magic(os, "TNVX");
  put<std::uint32_t>(os, kGridVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.channels()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.nx()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.ny()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.nz()));
  put<std::uint32_t>(os, grid.half_mode() ? 1u : 0u);
  for (int a = 0; a < 3; ++a) put<double>(os, grid.bbox_min()[a]);
  for (int a = 0; a < 3; ++a) put<double>(os, grid.bbox_max()[a]);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(grid.strides().size()));
  for (int s : grid.strides()) put<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  for (int c = 0; c < grid.channels(); ++c)
    for (int x = 0; x < grid.nx(); ++x)
      for (int y = 0; y < grid.ny(); ++y)
        for (int z = 0; z < grid.nz(); ++z) {
          const std::size_t i = grid.index(c, x, y, z);
          if (grid.half_mode())
            put<std::uint16_t>(os, grid.raw_half_data()[i]);
          else
            put<float>(os, grid.raw_data()[i]);
        }
}

void get_grid(std::istream& is, VoxelGrid<float>& grid, const TrainConfig& cfg) {
  expect_magic(is, "TNVX", "grid block");
  const auto version = get<std::uint32_t>(is);
  if (version != kGridVersion)
    throw parse_error("unsupported grid block version " + std::to_string(version));
  const int channels = static_cast<int>(get<std::uint32_t>(is));
  const int nx = static_cast<int>(get<std::uint32_t>(is));
  const int ny = static_cast<int>(get<std::uint32_t>(is));
  const int nz = static_cast<int>(get<std::uint32_t>(is));
  const auto dtype = get<std::uint32_t>(is);
  if (dtype > 1) throw parse_error("unknown grid dtype " + std::to_string(dtype));
  Vec3d bbox_min, bbox_max;
  for (int a = 0; a < 3; ++a) bbox_min[a] = get<double>(is);
  for (int a = 0; a < 3; ++a) bbox_max[a] = get<double>(is);
  const auto n_strides = get<std::uint32_t>(is);
  std::vector<int> strides(n_strides);
  for (auto& s : strides) s = static_cast<int>(get<std::uint32_t>(is));

  if (channels != cfg.cv || strides != cfg.strides)
    throw parse_error("grid block inconsistent with embedded config");

  grid = VoxelGrid<float>(channels, nx, ny, nz, bbox_min, bbox_max, strides);
  if (dtype == 1) {
    std::vector<std::uint16_t> payload(grid.num_values());
    for (int c = 0; c < channels; ++c)
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y)
          for (int z = 0; z < nz; ++z) payload[grid.index(c, x, y, z)] = get<std::uint16_t>(is);
    grid.load_half_payload(std::move(payload));
  } else {
    for (int c = 0; c < channels; ++c)
      for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y)
          for (int z = 0; z < nz; ++z) grid.set_value(grid.index(c, x, y, z), get<float>(is));
  }
}

void put_layers(std::ostream& os, const std::vector<const LinearLayer<float>*>& layers) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto* l : layers) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(l->out_dim()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(l->in_dim()));
    os.write(reinterpret_cast<const char*>(l->weight.data()),
             static_cast<std::streamsize>(sizeof(float) * l->weight.size()));
    os.write(reinterpret_cast<const char*>(l->bias.data()),
             static_cast<std::streamsize>(sizeof(float) * l->bias.size()));
  }
}

void get_layers(std::istream& is, const std::vector<LinearLayer<float>*>& layers) {
  const auto n = get<std::uint32_t>(is);
  if (n != layers.size()) throw parse_error("checkpoint layer count mismatch");
  for (auto* l : layers) {
    const int out = static_cast<int>(get<std::uint32_t>(is));
    const int in = static_cast<int>(get<std::uint32_t>(is));
    if (out != l->out_dim() || in != l->in_dim())
      throw parse_error("checkpoint layer shape mismatch");
    is.read(reinterpret_cast<char*>(l->weight.data()),
            static_cast<std::streamsize>(sizeof(float) * l->weight.size()));
    is.read(reinterpret_cast<char*>(l->bias.data()),
            static_cast<std::streamsize>(sizeof(float) * l->bias.size()));
    if (!is) throw io_error("truncated checkpoint");
  }
}

void put_group(std::ostream& os, const AdamGroup<float>& g) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(g.step_count));
  put<std::uint64_t>(os, g.m.size());
  os.write(reinterpret_cast<const char*>(g.m.data()),
           static_cast<std::streamsize>(sizeof(float) * g.m.size()));
  os.write(reinterpret_cast<const char*>(g.v.data()),
           static_cast<std::streamsize>(sizeof(float) * g.v.size()));
}

void get_group(std::istream& is, AdamGroup<float>& g, const std::string& id, double base_lr) {
  g.id = id;
  g.base_lr = base_lr;
  g.step_count = static_cast<std::int64_t>(get<std::uint64_t>(is));
  const auto n = get<std::uint64_t>(is);
  g.m.resize(n);
  g.v.resize(n);
  is.read(reinterpret_cast<char*>(g.m.data()), static_cast<std::streamsize>(sizeof(float) * n));
  is.read(reinterpret_cast<char*>(g.v.data()), static_cast<std::streamsize>(sizeof(float) * n));
  if (!is) throw io_error("truncated checkpoint");
}

}  // namespace

void save_checkpoint(const std::string& path, std::int64_t iteration, const Model<float>& model,
                     const std::string& rng_state, const AdamGroup<float>* opt_voxels,
                     const AdamGroup<float>* opt_deform, const AdamGroup<float>* opt_mlps,
                     const std::vector<double>& stride_grad_norms) {
  const bool has_opt = opt_voxels != nullptr;
  if (has_opt != (opt_deform != nullptr) || has_opt != (opt_mlps != nullptr))
    throw invalid_input("save_checkpoint: optimizer groups must be all present or all absent");

  std::ostringstream os(std::ios::binary);
  put_magic(os, "TNVC");
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, static_cast<std::uint64_t>(iteration));
  put_string(os, serialize_train_config(model.cfg));
  put_string(os, rng_state);
  put_grid(os, model.grid);
  put_layers(os, model.all_net_layers());
  put<std::uint8_t>(os, has_opt ? 1 : 0);
  if (has_opt) {
    put_group(os, *opt_voxels);
    put_group(os, *opt_deform);
    put_group(os, *opt_mlps);
  }
  put<std::uint32_t>(os, static_cast<std::uint32_t>(stride_grad_norms.size()));
  for (double v : stride_grad_norms) put<double>(os, v);

  atomic_write_file(path, os.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open checkpoint '" + path + "'");
  expect_magic(is, "TNVC", "checkpoint");
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw parse_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ck.iteration = static_cast<std::int64_t>(get<std::uint64_t>(is));
  const TrainConfig cfg = parse_train_config(get_string(is));
  ck.rng_state = get_string(is);

  // Grid block carries the live resolution (training may be mid-upscale).
  VoxelGrid<float> grid;
  get_grid(is, grid, cfg);
  ck.model = Model<float>(cfg, grid.nx(), grid.ny(), grid.nz());
  ck.model.grid = std::move(grid);
  get_layers(is, ck.model.all_net_layers());

  ck.has_optimizer = get<std::uint8_t>(is) != 0;
  if (ck.has_optimizer) {
    get_group(is, ck.opt_voxels, "voxels", cfg.lr_voxels);
    get_group(is, ck.opt_deform, "deform_net", cfg.lr_deform);
    get_group(is, ck.opt_mlps, "other_mlps", cfg.lr_mlps);
    if (ck.opt_voxels.m.size() != ck.model.grid.num_values())
      throw parse_error("checkpoint voxel optimizer state size mismatch");
  }
  const auto n_norms = get<std::uint32_t>(is);
  ck.stride_grad_norms.resize(n_norms);
  for (auto& v : ck.stride_grad_norms) v = get<double>(is);
  return ck;
}

}  // namespace tnv
