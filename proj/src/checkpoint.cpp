#include "ilac/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ilac/errors.hpp"
#include "ilac/json_io.hpp"

namespace ilac {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::string& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw VersionError("checkpoint is truncated");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

struct NamedArray {
  std::string name;
  const Tensor* tensor;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt, FloatWidth width) {
  validate_params(ckpt.params, ckpt.config);
  std::vector<NamedArray> arrays;
  for (const auto& [name, t] : param_entries(ckpt.params)) arrays.push_back({name, t});
  if (ckpt.adam) {
    auto entries = param_entries(ckpt.params);
    if (ckpt.adam->m.size() != entries.size() || ckpt.adam->v.size() != entries.size()) {
      throw DimensionError("Adam state does not match the parameter list");
    }
    for (std::size_t k = 0; k < entries.size(); ++k) arrays.push_back({"adam.m." + entries[k].first, &ckpt.adam->m[k]});
    for (std::size_t k = 0; k < entries.size(); ++k) arrays.push_back({"adam.v." + entries[k].first, &ckpt.adam->v[k]});
  }

  json header;
  header["format"] = kCheckpointFormat;
  header["float_width"] = static_cast<int>(width);
  header["config"] = ckpt.config;
  header["epochs_done"] = ckpt.epochs_done;
  header["adam_step"] = ckpt.adam ? json(ckpt.adam->t) : json(nullptr);
  header["meta"] = ckpt.meta;
  json list = json::array();
  for (const auto& a : arrays) list.push_back({{"name", a.name}, {"shape", a.tensor->shape()}});
  header["arrays"] = std::move(list);
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& a : arrays) {
    for (double v : a.tensor->data()) {
      if (width == FloatWidth::kF64) {
        put_le(out, v);
      } else {
        put_le(out, static_cast<float>(v));
      }
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, FloatWidth width) {
  const std::string bytes = serialize_checkpoint(ckpt, width);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw VersionError("not an ILAC checkpoint (bad magic)");
  }
  std::size_t pos = sizeof kCheckpointMagic;
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw VersionError("checkpoint header is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw VersionError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  if (header.value("format", std::string{}) != kCheckpointFormat) {
    throw VersionError("unsupported checkpoint format '" + header.value("format", std::string{}) + "'");
  }
  const int width = header.value("float_width", 0);
  if (width != 32 && width != 64) throw VersionError("unsupported float width " + std::to_string(width));

  Checkpoint ckpt;
  header.at("config").get_to(ckpt.config);
  ckpt.config.validate();
  ckpt.epochs_done = header.value("epochs_done", std::size_t{0});
  if (header.contains("meta")) ckpt.meta = header["meta"];

  const auto expected = param_shapes(ckpt.config);
  const auto& arrays = header.at("arrays");
  const bool has_adam = header.contains("adam_step") && !header["adam_step"].is_null();
  const std::size_t n_params = expected.size();
  if (arrays.size() != (has_adam ? 3 * n_params : n_params)) {
    throw VersionError("checkpoint lists " + std::to_string(arrays.size()) + " arrays; configuration needs " +
                       std::to_string(has_adam ? 3 * n_params : n_params));
  }

  std::vector<Tensor> tensors;
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    const auto name = arrays[k].at("name").get<std::string>();
    const auto shape = arrays[k].at("shape").get<Shape>();
    const auto& want = expected[k % n_params];
    const std::string prefix = k < n_params ? "" : (k < 2 * n_params ? "adam.m." : "adam.v.");
    if (name != prefix + want.first || shape != want.second) {
      throw VersionError("checkpoint array '" + name + "' " + shape_string(shape) + " does not match expected '" +
                         prefix + want.first + "' " + shape_string(want.second));
    }
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = width == 64 ? get_le<double>(bytes, pos) : static_cast<double>(get_le<float>(bytes, pos));
    tensors.emplace_back(shape, std::move(data));
  }
  if (pos != bytes.size()) throw VersionError("checkpoint has trailing bytes");

  auto entries = param_entries(ckpt.params);
  for (std::size_t k = 0; k < n_params; ++k) *entries[k].second = tensors[k];
  if (has_adam) {
    AdamState adam;
    adam.t = header["adam_step"].get<std::uint64_t>();
    adam.m.assign(tensors.begin() + static_cast<std::ptrdiff_t>(n_params),
                  tensors.begin() + static_cast<std::ptrdiff_t>(2 * n_params));
    adam.v.assign(tensors.begin() + static_cast<std::ptrdiff_t>(2 * n_params), tensors.end());
    ckpt.adam = std::move(adam);
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace ilac
