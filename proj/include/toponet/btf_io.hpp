#pragma once

// BTF weights on disk: a JSON manifest naming one TLM tensor per slot.
//
//   {"channels": C,
//    "eps": {"fusion_norm": 1e-5, "aggregation_norm": 1e-5},
//    "tensors": {"fusion_conv.weight": "fusion_conv.weight.tlm", ...}}
//
// Conv kernels are stored as (out*in, 3, 3), every vector as (1, 1, n).
// Paths are relative to the manifest's directory.

#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "toponet/btf.hpp"
#include "toponet/error.hpp"
#include "toponet/io.hpp"

namespace toponet {

namespace detail {

inline std::vector<double> load_slot(const std::filesystem::path& base, const nlohmann::json& tensors,
                                     const std::string& slot, std::uint32_t d0, std::uint32_t d1,
                                     std::uint32_t d2) {
  if (!tensors.contains(slot)) throw FormatError("BTF manifest lacks slot " + slot);
  const auto t = read_tlm(base / tensors.at(slot).get<std::string>());
  if (t.dim0 != d0 || t.dim1 != d1 || t.dim2 != d2) {
    throw ShapeError("BTF slot " + slot + " has shape " + std::to_string(t.dim0) + "x" + std::to_string(t.dim1) +
                     "x" + std::to_string(t.dim2) + ", expected " + std::to_string(d0) + "x" +
                     std::to_string(d1) + "x" + std::to_string(d2));
  }
  return {t.values.begin(), t.values.end()};
}

}  // namespace detail

inline BtfWeights load_btf_weights(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("BTF manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!m.contains("channels") || !m.contains("tensors")) throw FormatError("BTF manifest needs channels and tensors");
  const auto c = m.at("channels").get<std::uint32_t>();
  const auto base = manifest_path.parent_path();
  const auto& ts = m.at("tensors");

  BtfWeights w = BtfWeights::neutral(c);
  w.fusion_conv.kernel = detail::load_slot(base, ts, "fusion_conv.weight", 2 * c * c, 3, 3);
  w.fusion_conv.bias = detail::load_slot(base, ts, "fusion_conv.bias", 1, 1, c);
  w.aggregation_conv.kernel = detail::load_slot(base, ts, "aggregation_conv.weight", 2 * c * c, 3, 3);
  w.aggregation_conv.bias = detail::load_slot(base, ts, "aggregation_conv.bias", 1, 1, c);
  auto load_norm = [&](AffineNorm& n, const std::string& name, std::uint32_t size) {
    n.gamma = detail::load_slot(base, ts, name + ".gamma", 1, 1, size);
    n.beta = detail::load_slot(base, ts, name + ".beta", 1, 1, size);
    n.mean = detail::load_slot(base, ts, name + ".mean", 1, 1, size);
    n.var = detail::load_slot(base, ts, name + ".var", 1, 1, size);
    n.eps = m.contains("eps") && m["eps"].contains(name) ? m["eps"][name].get<double>() : 1e-5;
  };
  load_norm(w.fusion_norm, "fusion_norm", c);
  load_norm(w.aggregation_norm, "aggregation_norm", 2 * c);
  w.validate();
  return w;
}

/// Writes the manifest plus one TLM per slot into `dir`.
inline void save_btf_weights(const std::filesystem::path& dir, const BtfWeights& w) {
  w.validate();
  std::filesystem::create_directories(dir);
  const auto c = static_cast<std::uint32_t>(w.channels);
  nlohmann::json tensors;
  auto put = [&](const std::string& slot, std::uint32_t d0, std::uint32_t d1, std::uint32_t d2,
                 const std::vector<double>& v) {
    const std::string file = slot + ".tlm";
    write_tlm(dir / file, d0, d1, d2, v);
    tensors[slot] = file;
  };
  put("fusion_conv.weight", 2 * c * c, 3, 3, w.fusion_conv.kernel);
  put("fusion_conv.bias", 1, 1, c, w.fusion_conv.bias);
  for (auto [name, norm, size] : {std::tuple{"fusion_norm", &w.fusion_norm, c},
                                  std::tuple{"aggregation_norm", &w.aggregation_norm, 2 * c}}) {
    const std::string n = name;
    put(n + ".gamma", 1, 1, size, norm->gamma);
    put(n + ".beta", 1, 1, size, norm->beta);
    put(n + ".mean", 1, 1, size, norm->mean);
    put(n + ".var", 1, 1, size, norm->var);
  }
  put("aggregation_conv.weight", 2 * c * c, 3, 3, w.aggregation_conv.kernel);
  put("aggregation_conv.bias", 1, 1, c, w.aggregation_conv.bias);

  nlohmann::json m;
  m["channels"] = c;
  m["eps"] = {{"fusion_norm", w.fusion_norm.eps}, {"aggregation_norm", w.aggregation_norm.eps}};
  m["tensors"] = tensors;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << m.dump(2) << "\n";
}

}  // namespace toponet
