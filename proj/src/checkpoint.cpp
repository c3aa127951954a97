#include "ibiumad/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "ibiumad/errors.hpp"

namespace ibiumad {

namespace {

constexpr char kMagic[8] = {'I', 'B', 'I', 'U', 'M', 'A', 'D', 'C'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated checkpoint " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.items()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(p.tensor.data().data()),
             static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

void load_checkpoint(const std::string& path, const ParamSet& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error(path + " is not a checkpoint");
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint " + path + " has version " + std::to_string(version) + ", expected " +
                             std::to_string(kCheckpointVersion));
  const auto count = get<std::uint32_t>(is, path);
  std::map<std::string, std::pair<Shape, std::vector<double>>> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get<std::uint32_t>(is, path), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size())))
      throw std::runtime_error("truncated checkpoint " + path);
    Shape shape(get<std::uint32_t>(is, path));
    for (auto& d : shape) d = get<std::uint64_t>(is, path);
    std::vector<double> values(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw std::runtime_error("truncated checkpoint " + path);
    stored[name] = {std::move(shape), std::move(values)};
  }
  for (const auto& p : params.items()) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw std::out_of_range("checkpoint " + path + " has no parameter " + p.name);
    if (it->second.first != p.tensor.shape())
      throw DimensionError("checkpoint parameter " + p.name + " is " + shape_str(it->second.first) + ", model has " +
                           shape_str(p.tensor.shape()));
    Tensor target = p.tensor;  // shares storage with the model
    auto dst = target.data();
    std::copy(it->second.second.begin(), it->second.second.end(), dst.begin());
  }
}

}  // namespace ibiumad
