#include "gzsl_align/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gzsl_align/errors.hpp"

namespace gzsl {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'G', 'Z', 'S', 'L', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return x;
}

void put_doubles(std::string& out, std::span<const double> values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

json spec_json(const MlpSpec& spec) { return spec.layer_dims; }

MlpSpec spec_from(const json& j) { return MlpSpec{j.get<std::vector<std::size_t>>()}; }

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  void read_doubles(std::span<double> out) {
    if (pos_ + 8 * out.size() > bytes_.size()) {
      throw DataError("checkpoint '" + path_.string() + "' is truncated");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<double>(get_u64(p + 8 * i));
    pos_ += 8 * out.size();
  }

  void seek(std::size_t pos) { pos_ = pos; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ckpt.params.validate();
  json header;
  header["format"] = "gzsl-align-checkpoint";
  header["version"] = 1;
  header["specs"] = {{"encoder", ckpt.params.encoder ? spec_json(ckpt.params.encoder->spec) : json(nullptr)},
                     {"visual_map", spec_json(ckpt.params.visual_map.spec)},
                     {"semantic_map", spec_json(ckpt.params.semantic_map.spec)}};
  header["seed"] = ckpt.seed;
  header["epoch"] = ckpt.epoch;
  header["config_hash"] = ckpt.config_hash;
  json tensor_list = json::array();
  const auto params = tensors(ckpt.params);
  for (const auto& t : params) tensor_list.push_back({{"name", t.name}, {"size", t.values.size()}});
  header["tensors"] = tensor_list;
  if (ckpt.optimizer) {
    const AdamState& s = *ckpt.optimizer;
    header["optimizer"] = {{"type", "adam"},   {"step_count", s.step_count}, {"lr", s.lr},
                           {"beta1", s.beta1}, {"beta2", s.beta2},           {"epsilon", s.epsilon},
                           {"tensors", s.names}};
  } else {
    header["optimizer"] = nullptr;
  }

  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& t : params) put_doubles(out, t.values);
  if (ckpt.optimizer) {
    for (const auto& m : ckpt.optimizer->m) put_doubles(out, m);
    for (const auto& v : ckpt.optimizer->v) put_doubles(out, v);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path.string() + "' is not a checkpoint file");
  }
  const std::uint64_t header_len = get_u64(reinterpret_cast<const unsigned char*>(bytes.data()) + 8);
  if (16 + header_len > bytes.size()) throw DataError("checkpoint '" + path.string() + "' is truncated");

  Checkpoint ckpt;
  try {
    const json header = json::parse(bytes.substr(16, header_len));
    const json& specs = header.at("specs");
    ckpt.params.visual_map = MlpParams::zeros(spec_from(specs.at("visual_map")));
    ckpt.params.semantic_map = MlpParams::zeros(spec_from(specs.at("semantic_map")));
    if (!specs.at("encoder").is_null()) ckpt.params.encoder = MlpParams::zeros(spec_from(specs.at("encoder")));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.epoch = header.at("epoch").get<std::size_t>();
    ckpt.config_hash = header.at("config_hash").get<std::string>();

    Reader reader(bytes, path);
    reader.seek(16 + header_len);
    auto params = tensors(ckpt.params);
    const json& listed = header.at("tensors");
    if (listed.size() != params.size()) throw DataError("checkpoint tensor list does not match its specs");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (listed[i].at("name").get<std::string>() != params[i].name ||
          listed[i].at("size").get<std::size_t>() != params[i].values.size()) {
        throw DataError("checkpoint tensor '" + params[i].name + "' does not match its spec");
      }
      reader.read_doubles(params[i].values);
    }

    const json& opt = header.at("optimizer");
    if (!opt.is_null()) {
      AdamState s;
      s.step_count = opt.at("step_count").get<std::size_t>();
      s.lr = opt.at("lr").get<double>();
      s.beta1 = opt.at("beta1").get<double>();
      s.beta2 = opt.at("beta2").get<double>();
      s.epsilon = opt.at("epsilon").get<double>();
      s.names = opt.at("tensors").get<std::vector<std::string>>();
      auto sizes = [&](const std::string& name) -> std::size_t {
        for (const auto& t : params) if (t.name == name) return t.values.size();
        throw DataError("optimizer state references unknown tensor '" + name + "'");
      };
      for (const auto& name : s.names) s.m.emplace_back(sizes(name), 0.0);
      for (const auto& name : s.names) s.v.emplace_back(sizes(name), 0.0);
      for (auto& m : s.m) reader.read_doubles(m);
      for (auto& v : s.v) reader.read_doubles(v);
      s.validate();
      ckpt.optimizer = std::move(s);
    }
    if (!reader.at_end()) throw DataError("checkpoint '" + path.string() + "' has trailing bytes");
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "' has a malformed header: " + e.what());
  }
  ckpt.params.validate();
  return ckpt;
}

}  // namespace gzsl
