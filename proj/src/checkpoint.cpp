#include "deh/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace deh {
namespace {

std::string shape_text(const std::vector<std::size_t>& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out;
}

std::string tensor_manifest(const ModelLayout& layout) {
  std::ostringstream out;
  out << "--- tensors " << layout.tensors().size() << " " << layout.param_count() << "\n";
  for (const TensorInfo& t : layout.tensors())
    out << t.name << " " << t.offset << " " << shape_text(t.shape) << "\n";
  return out.str();
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config,
                     std::span<const double> params) {
  const ModelLayout layout(config.model);
  require(params.size() == layout.param_count(), ErrorKind::dimension_mismatch,
          "checkpoint: parameter count does not match the model");
  const std::string manifest = to_config_text(config) + tensor_manifest(layout);
  std::string bytes(kCheckpointMagic, 8);
  const auto len = static_cast<std::uint32_t>(manifest.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  bytes += manifest;
  for (const double p : params) put_u64(bytes, std::bit_cast<std::uint64_t>(p));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint '" + path.string() + "': ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    fail(ErrorKind::io, where + "bad magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(raw[8 + i]) << (8 * i);
  if (bytes.size() < 12 + static_cast<std::size_t>(len))
    fail(ErrorKind::io, where + "truncated manifest");
  const std::string manifest = bytes.substr(12, len);
  const auto split = manifest.find("--- tensors ");
  if (split == std::string::npos) fail(ErrorKind::io, where + "manifest lacks a tensor list");

  Checkpoint ck;
  std::istringstream config_text(manifest.substr(0, split));
  ck.config = parse_config(config_text, where + "manifest");
  const ModelLayout layout(ck.config.model);
  if (manifest.substr(split) != tensor_manifest(layout))
    fail(ErrorKind::io, where + "tensor list does not match the model config");

  const std::size_t data = 12 + len;
  if (bytes.size() != data + 8 * layout.param_count())
    fail(ErrorKind::io, where + "expected " + std::to_string(layout.param_count()) +
                            " parameters, found " + std::to_string((bytes.size() - data) / 8));
  ck.params.resize(layout.param_count());
  for (std::size_t i = 0; i < ck.params.size(); ++i)
    ck.params[i] = std::bit_cast<double>(get_u64(raw + data + 8 * i));
  return ck;
}

}  // namespace deh
