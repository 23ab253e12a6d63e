#include "lyr/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lyr {
namespace {

void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw Error("checkpoint: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot write '" + path + "'");
  os << "LYRC 1\n" << params.count() << "\n";
  for (const auto& [name, t] : params.all()) {
    if (name.find_first_of(" \t\n") != std::string::npos)
      throw Error("checkpoint: parameter id '" + name + "' contains whitespace");
    os << name << " " << t.rank();
    for (std::size_t d : t.shape) os << " " << d;
    os << "\n";
  }
  for (const auto& [name, t] : params.all())
    for (double v : t.data) put_f64_le(os, v);
  if (!os) throw Error("checkpoint: write failed for '" + path + "'");
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot read '" + path + "'");
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "LYRC" || version != 1)
    throw Error("checkpoint: '" + path + "' is not a version-1 checkpoint");
  std::size_t n = 0;
  is >> n;
  std::vector<std::pair<std::string, Shape>> manifest;
  manifest.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string name;
    std::size_t rank = 0;
    if (!(is >> name >> rank)) throw Error("checkpoint: truncated manifest");
    Shape shape(rank);
    for (std::size_t d = 0; d < rank; ++d)
      if (!(is >> shape[d])) throw Error("checkpoint: truncated manifest");
    manifest.emplace_back(std::move(name), std::move(shape));
  }
  is.get();  // newline before payload
  ParamStore out;
  for (auto& [name, shape] : manifest) {
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = get_f64_le(is);
    out.ensure(name, [&] { return std::move(t); });
  }
  return out;
}

}  // namespace lyr
