#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "aasist3/model.hpp"

namespace aasist3 {

namespace {

constexpr char kMagic[4] = {'A', 'A', 'S', '3'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f32(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) {
      throw CheckpointException(CheckpointError::kFormat, path + ": cannot open checkpoint");
    }
  }

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw CheckpointException(CheckpointError::kFormat, path_ + ": truncated checkpoint");
    }
  }

  std::uint16_t u16() {
    unsigned char b[2];
    bytes(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
};

void write_tensor_entry(std::ofstream& out, const std::string& name, const Tensor& t) {
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  out.put(static_cast<char>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  const double* d = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i) put_f32(out, static_cast<float>(d[i]));
}

}  // namespace

void save_checkpoint(Aasist3Model& model, const ConfigDocument& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CheckpointException(CheckpointError::kFormat, path + ": cannot write checkpoint");
  }
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const std::string config = serialize_config(doc);
  put_u64(out, config.size());
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  const std::size_t count = model.params().size() + model.buffers().size();
  put_u32(out, static_cast<std::uint32_t>(count));
  for (const auto& [name, tensor] : model.params()) write_tensor_entry(out, name, tensor);
  for (const auto& [name, tensor] : model.buffers()) write_tensor_entry(out, name, tensor);
  if (!out) {
    throw CheckpointException(CheckpointError::kFormat, path + ": failed writing checkpoint");
  }
}

LoadedModel load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointException(CheckpointError::kFormat, path + ": not a checkpoint file");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CheckpointException(CheckpointError::kVersion,
                              path + ": unsupported checkpoint version " +
                                  std::to_string(version));
  }
  const std::uint64_t config_len = r.u64();
  std::string config_text(config_len, '\0');
  r.bytes(config_text.data(), config_len);
  ConfigDocument doc;
  try {
    doc = parse_config(config_text);
  } catch (const std::exception& e) {
    throw CheckpointException(CheckpointError::kConfig,
                              path + ": embedded config invalid: " + e.what());
  }

  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  std::map<std::string, Tensor*> by_name;
  for (auto& [name, tensor] : model.params()) by_name[name] = &tensor;
  for (auto& [name, tensor] : model.buffers()) by_name[name] = &tensor;

  const std::uint32_t count = r.u32();
  if (count != by_name.size()) {
    throw CheckpointException(CheckpointError::kConfig,
                              path + ": checkpoint holds " + std::to_string(count) +
                                  " tensors, model expects " +
                                  std::to_string(by_name.size()));
  }
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    char ndim_c;
    r.bytes(&ndim_c, 1);
    const int ndim = static_cast<int>(ndim_c);
    Shape shape(static_cast<std::size_t>(ndim));
    for (int i = 0; i < ndim; ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(r.u32());

    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointException(CheckpointError::kConfig,
                                path + ": unexpected tensor \"" + name + "\"");
    }
    Tensor& dst = *it->second;
    if (shape != dst.shape()) {
      throw CheckpointException(CheckpointError::kShape,
                                path + ": tensor \"" + name + "\" has shape " +
                                    shape_str(shape) + ", expected " + shape_str(dst.shape()));
    }
    double* d = dst.data();
    for (std::size_t i = 0; i < dst.numel(); ++i) d[i] = static_cast<double>(r.f32());
  }
  return LoadedModel{doc, std::move(model)};
}

LoadedModel load_checkpoint_compatible(const std::string& path, const ConfigDocument& expected) {
  LoadedModel loaded = load_checkpoint(path);
  const auto embedded = nlohmann::json::parse(serialize_config(loaded.doc)).at("model");
  const auto wanted = nlohmann::json::parse(serialize_config(expected)).at("model");
  if (embedded != wanted) {
    throw CheckpointException(CheckpointError::kConfig,
                              path + ": checkpoint model configuration differs from the "
                                     "requested configuration");
  }
  return loaded;
}

}  // namespace aasist3
