#include "tineuvox/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tnv {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size() || (!v.empty() && v[0] == '-')) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw config_error("config key '" + key + "': expected real number, got '" + v + "'");
  }
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

Vec3d parse_vec3(const std::string& key, const std::string& v) {
  const auto parts = split_commas(v);
  if (parts.size() != 3)
    throw config_error("config key '" + key + "': expected three comma-separated reals");
  return Vec3d(parse_real(key, parts[0]), parse_real(key, parts[1]), parse_real(key, parts[2]));
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string format_vec3(const Vec3d& v) {
  return format_real(v.x()) + "," + format_real(v.y()) + "," + format_real(v.z());
}

template <class Int>
std::string format_list(const std::vector<Int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"grid_nx", [&](const std::string& k, const std::string& v) { c.grid_nx = static_cast<int>(parse_int(k, v)); }},
      {"grid_ny", [&](const std::string& k, const std::string& v) { c.grid_ny = static_cast<int>(parse_int(k, v)); }},
      {"grid_nz", [&](const std::string& k, const std::string& v) { c.grid_nz = static_cast<int>(parse_int(k, v)); }},
      {"cv", [&](const std::string& k, const std::string& v) { c.cv = static_cast<int>(parse_int(k, v)); }},
      {"strides",
       [&](const std::string& k, const std::string& v) {
         c.strides.clear();
         for (const auto& p : split_commas(v)) c.strides.push_back(static_cast<int>(parse_int(k, p)));
       }},
      {"bbox_min", [&](const std::string& k, const std::string& v) { c.bbox_min = parse_vec3(k, v); }},
      {"bbox_max", [&](const std::string& k, const std::string& v) { c.bbox_max = parse_vec3(k, v); }},
      {"ch", [&](const std::string& k, const std::string& v) { c.ch = static_cast<int>(parse_int(k, v)); }},
      {"ct", [&](const std::string& k, const std::string& v) { c.ct = static_cast<int>(parse_int(k, v)); }},
      {"pe_x", [&](const std::string& k, const std::string& v) { c.pe_x = static_cast<int>(parse_int(k, v)); }},
      {"pe_d", [&](const std::string& k, const std::string& v) { c.pe_d = static_cast<int>(parse_int(k, v)); }},
      {"pe_t", [&](const std::string& k, const std::string& v) { c.pe_t = static_cast<int>(parse_int(k, v)); }},
      {"pe_f", [&](const std::string& k, const std::string& v) { c.pe_f = static_cast<int>(parse_int(k, v)); }},
      {"sigma_shift", [&](const std::string& k, const std::string& v) { c.sigma_shift = parse_real(k, v); }},
      {"total_iters", [&](const std::string& k, const std::string& v) { c.total_iters = parse_int(k, v); }},
      {"batch_rays", [&](const std::string& k, const std::string& v) { c.batch_rays = static_cast<int>(parse_int(k, v)); }},
      {"lr_voxels", [&](const std::string& k, const std::string& v) { c.lr_voxels = parse_real(k, v); }},
      {"lr_deform", [&](const std::string& k, const std::string& v) { c.lr_deform = parse_real(k, v); }},
      {"lr_mlps", [&](const std::string& k, const std::string& v) { c.lr_mlps = parse_real(k, v); }},
      {"lambda_all", [&](const std::string& k, const std::string& v) { c.lambda_all = parse_real(k, v); }},
      {"lambda_bg", [&](const std::string& k, const std::string& v) { c.lambda_bg = parse_real(k, v); }},
      {"upscale_iters",
       [&](const std::string& k, const std::string& v) {
         c.upscale_iters.clear();
         if (trim(v).empty()) return;  // empty list disables upscaling
         for (const auto& p : split_commas(v)) c.upscale_iters.push_back(parse_int(k, p));
       }},
      {"half_precision_last",
       [&](const std::string& k, const std::string& v) { c.half_precision_last = parse_int(k, v); }},
      {"alpha_threshold",
       [&](const std::string& k, const std::string& v) { c.alpha_threshold = parse_real(k, v); }},
      {"background", [&](const std::string&, const std::string& v) { c.background = v; }},
      {"seed", [&](const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); }},
      {"checkpoint_every",
       [&](const std::string& k, const std::string& v) { c.checkpoint_every = parse_int(k, v); }},
      {"val_every", [&](const std::string& k, const std::string& v) { c.val_every = parse_int(k, v); }},
  };

  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw config_error("unknown config key '" + key + "'");
    it->second(key, value);
  }
  validate_train_config(c);
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_train_config(buf.str());
}

std::string serialize_train_config(const TrainConfig& c) {
  std::string out;
  const auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("grid_nx", std::to_string(c.grid_nx));
  kv("grid_ny", std::to_string(c.grid_ny));
  kv("grid_nz", std::to_string(c.grid_nz));
  kv("cv", std::to_string(c.cv));
  kv("strides", format_list(c.strides));
  kv("bbox_min", format_vec3(c.bbox_min));
  kv("bbox_max", format_vec3(c.bbox_max));
  kv("ch", std::to_string(c.ch));
  kv("ct", std::to_string(c.ct));
  kv("pe_x", std::to_string(c.pe_x));
  kv("pe_d", std::to_string(c.pe_d));
  kv("pe_t", std::to_string(c.pe_t));
  kv("pe_f", std::to_string(c.pe_f));
  kv("sigma_shift", format_real(c.sigma_shift));
  kv("total_iters", std::to_string(c.total_iters));
  kv("batch_rays", std::to_string(c.batch_rays));
  kv("lr_voxels", format_real(c.lr_voxels));
  kv("lr_deform", format_real(c.lr_deform));
  kv("lr_mlps", format_real(c.lr_mlps));
  kv("lambda_all", format_real(c.lambda_all));
  kv("lambda_bg", format_real(c.lambda_bg));
  kv("upscale_iters", format_list(c.upscale_iters));
  kv("half_precision_last", std::to_string(c.half_precision_last));
  kv("alpha_threshold", format_real(c.alpha_threshold));
  kv("background", c.background);
  kv("seed", std::to_string(c.seed));
  kv("checkpoint_every", std::to_string(c.checkpoint_every));
  kv("val_every", std::to_string(c.val_every));
  return out;
}

void validate_train_config(const TrainConfig& c) {
  if (c.grid_nx < 2 || c.grid_ny < 2 || c.grid_nz < 2)
    throw config_error("grid_nx/ny/nz must be >= 2");
  if (c.cv < 1) throw config_error("cv must be >= 1");
  if (c.strides.empty()) throw config_error("strides must be nonempty");
  for (std::size_t i = 0; i < c.strides.size(); ++i) {
    if (c.strides[i] < 1) throw config_error("strides must be positive");
    if (i > 0 && c.strides[i] <= c.strides[i - 1])
      throw config_error("strides must be strictly increasing");
  }
  for (int a = 0; a < 3; ++a)
    if (!(c.bbox_min[a] < c.bbox_max[a])) throw config_error("bbox_min must be < bbox_max");
  if (c.ch < 1) throw config_error("ch must be >= 1");
  if (c.pe_x < 0 || c.pe_d < 0 || c.pe_t < 0 || c.pe_f < 0)
    throw config_error("PE frequency counts must be >= 0");
  if (c.ct != c.cv * (2 * c.pe_f + 1))
    throw config_error("ct must equal cv * (2*pe_f + 1); got ct=" + std::to_string(c.ct) +
                       " vs " + std::to_string(c.cv * (2 * c.pe_f + 1)));
  if (!std::isfinite(c.sigma_shift)) throw config_error("sigma_shift must be finite");
  if (c.total_iters < 0) throw config_error("total_iters must be >= 0");
  if (c.batch_rays < 1) throw config_error("batch_rays must be >= 1");
  if (!(c.lr_voxels > 0) || !(c.lr_deform > 0) || !(c.lr_mlps > 0))
    throw config_error("learning rates must be positive");
  if (c.lambda_all < 0 || c.lambda_bg < 0) throw config_error("loss weights must be >= 0");
  for (std::size_t i = 0; i < c.upscale_iters.size(); ++i) {
    if (c.upscale_iters[i] < 1) throw config_error("upscale_iters must be positive");
    if (i > 0 && c.upscale_iters[i] <= c.upscale_iters[i - 1])
      throw config_error("upscale_iters must be strictly increasing");
    if (c.total_iters > 0 && c.upscale_iters[i] >= c.total_iters)
      throw config_error("upscale_iters must be < total_iters");
  }
  if (c.half_precision_last < 0 || c.half_precision_last > std::max<std::int64_t>(c.total_iters, 0))
    throw config_error("half_precision_last must be in [0, total_iters]");
  if (!(c.alpha_threshold >= 0.0) || c.alpha_threshold >= 1.0)
    throw config_error("alpha_threshold must be in [0, 1)");
  if (c.background != "black" && c.background != "white")
    throw config_error("background must be 'black' or 'white'");
  if (c.checkpoint_every < 0) throw config_error("checkpoint_every must be >= 0");
  if (c.val_every < 0) throw config_error("val_every must be >= 0");
}

int grid_resolution_at(int base_n, const std::vector<std::int64_t>& upscale_iters,
                       std::int64_t iter) {
  int n = (base_n + 7) / 8;
  for (const auto u : upscale_iters)
    if (iter >= u) n = std::min(2 * n, base_n);
  return std::min(n, base_n);
}

}  // namespace tnv
