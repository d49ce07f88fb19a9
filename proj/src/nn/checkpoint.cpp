#include "sketchpart/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "sketchpart/errors.hpp"

namespace sketchpart::nn {
namespace {

constexpr std::array<char, 8> kMagic{'S', 'K', 'P', 'C', 'K', 'P', 'T', '1'};

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <class UInt>
UInt get_le(std::istream& in) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw ParseError("checkpoint truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  constexpr std::uint64_t kMax = std::uint64_t{1} << 32;
  if (n > kMax) throw ParseError("checkpoint field too large");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint truncated");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const nlohmann::json& model_config, const ParameterStore& params,
                      const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["format_version"] = kCheckpointFormatVersion;
  header["model_config"] = model_config;
  const auto text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_le<std::uint64_t>(out, params.size());
  for (const auto& e : params.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto extent : e.shape) put_le<std::uint64_t>(out, extent);
    for (double v : e.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& model_config,
                     const ParameterStore& params, const nlohmann::json& extra) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, model_config, params, extra);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw ParseError("not a checkpoint (bad magic)");
  Checkpoint ckpt;
  const auto header_len = get_le<std::uint64_t>(in);
  try {
    ckpt.header = nlohmann::json::parse(get_bytes(in, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  if (ckpt.header.value("format_version", 0) != kCheckpointFormatVersion) {
    throw ParseError("unsupported checkpoint format_version");
  }
  const auto count = get_le<std::uint64_t>(in);
  for (std::uint64_t t = 0; t < count; ++t) {
    auto name = get_bytes(in, get_le<std::uint32_t>(in));
    const auto rank = get_le<std::uint32_t>(in);
    Shape shape(rank);
    for (auto& extent : shape) extent = get_le<std::uint64_t>(in);
    std::vector<double> values(element_count(shape));
    for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    ckpt.parameters.add(std::move(name), std::move(shape), std::move(values));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace sketchpart::nn
