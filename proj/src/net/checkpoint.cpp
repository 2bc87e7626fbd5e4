#include "rtplan/net/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoints are little-endian; big-endian hosts unsupported");

namespace rtplan::net {

using nlohmann::json;

void save_checkpoint(const ParamStore& ps, const json& meta, const std::string& path) {
  json manifest;
  json tensors = json::array();
  for (const auto& name : ps.names()) {
    const Tensor& t = ps.at(name);
    tensors.push_back({{"name", name}, {"shape", t.shape}});
  }
  manifest["tensors"] = tensors;
  manifest["meta"] = meta;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os << manifest.dump() << '\n';
  for (const auto& name : ps.names()) {
    const Vec& d = ps.at(name).data;
    os.write(reinterpret_cast<const char*>(d.data()),
             static_cast<std::streamsize>(d.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path, json* meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_checkpoint: missing manifest");
  json manifest = json::parse(line);
  if (meta) *meta = manifest.value("meta", json::object());

  ParamStore ps;
  for (const auto& t : manifest.at("tensors")) {
    auto name = t.at("name").get<std::string>();
    auto shape = t.at("shape").get<std::vector<std::size_t>>();
    ps.add(name, shape);
  }
  for (const auto& name : ps.names()) {
    Vec& d = ps.at(name).data;
    if (!is.read(reinterpret_cast<char*>(d.data()),
                 static_cast<std::streamsize>(d.size() * sizeof(double))))
      throw std::runtime_error("load_checkpoint: truncated blob in " + path);
  }
  return ps;
}

}  // namespace rtplan::net
