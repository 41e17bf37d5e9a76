#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "armtune/errors.hpp"
#include "armtune/hyperparams.hpp"
#include "armtune/mlp.hpp"

namespace armtune {

// Versioned binary container: little-endian, doubles stored as raw 8-byte
// words, so save -> load -> save reproduces the file bit for bit.
inline constexpr char kCheckpointMagic[4] = {'A', 'T', 'C', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string algo;  // "ppo" | "sac"
  ParamMap params;   // originating hyperparameter record
  std::uint64_t seed = 0;
  std::int64_t episodes_at_save = 0;
  std::vector<std::pair<std::string, MlpSpec>> specs;
  std::vector<std::pair<std::string, Eigen::VectorXd>> tensors;  // net flats and extra vectors
  std::vector<std::pair<std::string, AdamState>> adam_states;

  const Eigen::VectorXd& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return t;
    }
    throw IoError("checkpoint: missing tensor '" + name + "'");
  }
  const MlpSpec& spec(const std::string& name) const {
    for (const auto& [n, s] : specs) {
      if (n == name) return s;
    }
    throw IoError("checkpoint: missing net spec '" + name + "'");
  }
  const AdamState& adam(const std::string& name) const {
    for (const auto& [n, s] : adam_states) {
      if (n == name) return s;
    }
    throw IoError("checkpoint: missing optimizer state '" + name + "'");
  }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_i64(std::ostream& os, std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
  put_u64(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw IoError("checkpoint: truncated file");
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("checkpoint: truncated file");
  return v;
}
inline std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("checkpoint: truncated file");
  return v;
}
inline double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw IoError("checkpoint: truncated file");
  return v;
}
inline std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw IoError("checkpoint: truncated file");
  return s;
}
inline Eigen::VectorXd get_vector(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  if (n > 0 && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8))) {
    throw IoError("checkpoint: truncated file");
  }
  return v;
}

inline nlohmann::ordered_json param_value_to_json(const ParamValue& v) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  return std::get<std::string>(v);
}

inline ParamValue param_value_from_json(const nlohmann::json& j) {
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw IoError("parameter value has unsupported JSON type");
}

inline std::string params_to_json_text(const ParamMap& params) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : params) j[k] = param_value_to_json(v);
  return j.dump();
}

inline ParamMap params_from_json(const nlohmann::json& j) {
  ParamMap out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = param_value_from_json(it.value());
  return out;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& cp) {
  os.write(kCheckpointMagic, 4);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_string(os, cp.algo);
  detail::put_string(os, detail::params_to_json_text(cp.params));
  detail::put_u64(os, cp.seed);
  detail::put_i64(os, cp.episodes_at_save);
  detail::put_u32(os, static_cast<std::uint32_t>(cp.specs.size()));
  for (const auto& [name, spec] : cp.specs) {
    detail::put_string(os, name);
    detail::put_u32(os, static_cast<std::uint32_t>(spec.input_dim));
    detail::put_u32(os, static_cast<std::uint32_t>(spec.hidden.size()));
    for (int w : spec.hidden) detail::put_u32(os, static_cast<std::uint32_t>(w));
    detail::put_u32(os, static_cast<std::uint32_t>(spec.output_dim));
    detail::put_u32(os, static_cast<std::uint32_t>(spec.activation));
  }
  detail::put_u32(os, static_cast<std::uint32_t>(cp.tensors.size()));
  for (const auto& [name, t] : cp.tensors) {
    detail::put_string(os, name);
    detail::put_vector(os, t);
  }
  detail::put_u32(os, static_cast<std::uint32_t>(cp.adam_states.size()));
  for (const auto& [name, s] : cp.adam_states) {
    detail::put_string(os, name);
    detail::put_vector(os, s.first_moment);
    detail::put_vector(os, s.second_moment);
    detail::put_i64(os, s.step_count);
    detail::put_f64(os, s.beta1);
    detail::put_f64(os, s.beta2);
    detail::put_f64(os, s.epsilon);
  }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, cp);
  if (!os) throw IoError("write failed: " + path);
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw IoError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = detail::get_u32(is);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint cp;
  cp.algo = detail::get_string(is);
  try {
    cp.params = detail::params_from_json(nlohmann::json::parse(detail::get_string(is)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad params record: ") + e.what());
  }
  cp.seed = detail::get_u64(is);
  cp.episodes_at_save = detail::get_i64(is);
  const std::uint32_t n_specs = detail::get_u32(is);
  for (std::uint32_t i = 0; i < n_specs; ++i) {
    std::string name = detail::get_string(is);
    MlpSpec spec;
    spec.input_dim = static_cast<int>(detail::get_u32(is));
    const std::uint32_t nh = detail::get_u32(is);
    for (std::uint32_t k = 0; k < nh; ++k) spec.hidden.push_back(static_cast<int>(detail::get_u32(is)));
    spec.output_dim = static_cast<int>(detail::get_u32(is));
    spec.activation = static_cast<Activation>(detail::get_u32(is));
    cp.specs.emplace_back(std::move(name), std::move(spec));
  }
  const std::uint32_t n_tensors = detail::get_u32(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = detail::get_string(is);
    cp.tensors.emplace_back(std::move(name), detail::get_vector(is));
  }
  const std::uint32_t n_adam = detail::get_u32(is);
  for (std::uint32_t i = 0; i < n_adam; ++i) {
    std::string name = detail::get_string(is);
    AdamState s;
    s.first_moment = detail::get_vector(is);
    s.second_moment = detail::get_vector(is);
    s.step_count = detail::get_i64(is);
    s.beta1 = detail::get_f64(is);
    s.beta2 = detail::get_f64(is);
    s.epsilon = detail::get_f64(is);
    cp.adam_states.emplace_back(std::move(name), std::move(s));
  }
  return cp;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

}  // namespace armtune
