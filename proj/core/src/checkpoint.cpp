#include "htgnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "htgnn/config_json.hpp"
#include "htgnn/errors.hpp"

namespace htgnn {

namespace {

constexpr char kMagic[8] = {'H', 'T', 'G', 'N', 'N', 'C', 'K', 'P'};
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(const HTGNNParams& params, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format"] = "htgnn-checkpoint";
  header["version"] = kVersion;
  header["schema"] = schema_to_json(params.meta());
  header["model"] = model_config_to_json(params.config());
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const Parameter& p : params.parameters()) {
    table.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  header["parameters"] = table;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out += text;
  for (const Parameter& p : params.parameters()) {
    const auto values = p.value.data();
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError(fmt::format("{}: cannot open for writing", path.string()));
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError(fmt::format("{}: write failed", path.string()));
}

HTGNNParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw ParseError(fmt::format("{}: cannot open checkpoint", path.string()));
  std::ostringstream buf;
  buf << file.rdbuf();
  const std::string in = buf.str();
  if (in.size() < 16 || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError(fmt::format("{}: not a checkpoint file", path.string()));
  }
  const std::uint64_t header_size = get_u64(in, 8);
  if (header_size > in.size() - 16) {
    throw ParseError(fmt::format("{}: truncated header", path.string()));
  }

  HTGNNParams params;
  std::vector<std::vector<double>> values;
  try {
    const auto header = nlohmann::json::parse(in.substr(16, header_size));
    if (header.at("format") != "htgnn-checkpoint" || header.at("version") != kVersion) {
      throw ParseError(fmt::format("{}: unsupported checkpoint format", path.string()));
    }
    params = HTGNNParams::zeros(schema_from_json(header.at("schema")),
                                model_config_from_json(header.at("model")));
    const auto& table = header.at("parameters");
    const auto& registry = params.parameters();
    if (table.size() != registry.size()) {
      throw ParseError(fmt::format("{}: {} parameters stored, configuration has {}",
                                   path.string(), table.size(), registry.size()));
    }
    std::size_t offset = 16 + header_size;
    for (std::size_t i = 0; i < registry.size(); ++i) {
      const std::string name = table[i].at("name").get<std::string>();
      const Shape shape = table[i].at("shape").get<Shape>();
      if (name != registry[i].name || shape != registry[i].value.shape()) {
        throw ParseError(fmt::format("{}: parameter {} is {} {}, expected {} {}", path.string(),
                                     i, name, shape_string(shape), registry[i].name,
                                     shape_string(registry[i].value.shape())));
      }
      const std::size_t bytes = registry[i].value.numel() * sizeof(double);
      if (offset + bytes > in.size()) {
        throw ParseError(fmt::format("{}: truncated at parameter {}", path.string(), name));
      }
      std::vector<double> block(registry[i].value.numel());
      std::memcpy(block.data(), in.data() + offset, bytes);
      offset += bytes;
      values.push_back(std::move(block));
    }
    if (offset != in.size()) {
      throw ParseError(fmt::format("{}: {} trailing bytes", path.string(), in.size() - offset));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  params.restore(values);
  return params;
}

}  // namespace htgnn
