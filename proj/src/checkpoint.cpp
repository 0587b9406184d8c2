#include "hge/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace hge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void write_blob(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(t.data()), t.size() * 8);
}

void read_blob(const fs::path& path, Tensor& t) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IncompatibilityError("missing checkpoint blob: " + path.string());
  in.read(reinterpret_cast<char*>(t.data()), t.size() * 8);
  if (in.gcount() != t.size() * 8)
    throw IncompatibilityError("checkpoint blob truncated: " + path.string());
  if (!t.all_finite()) throw NumericError("checkpoint blob contains NaN/Inf: " + path.string());
}

}  // namespace

void save_checkpoint(const std::string& dir, ModelParams& params, const AdamState& opt,
                     int epoch) {
  fs::create_directories(dir);
  auto reg = params.registry();
  if (opt.m.size() != reg.size())
    throw DimensionError("save_checkpoint: optimizer state does not match parameters");

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["config"] = json::parse(params.cfg.to_json_string());
  manifest["config_hash"] = params.cfg.hash();
  manifest["epoch"] = epoch;
  manifest["step"] = opt.step;
  manifest["input_dim"] = params.input_dim;
  manifest["node_count"] = params.node_count;
  manifest["class_count"] = params.class_count;
  manifest["adam"] = {{"lr", opt.cfg.lr},
                      {"beta1", opt.cfg.beta1},
                      {"beta2", opt.cfg.beta2},
                      {"eps", opt.cfg.eps}};
  json plist = json::array();
  for (std::size_t i = 0; i < reg.size(); ++i) {
    plist.push_back({{"name", reg[i].name}, {"shape", reg[i].tensor->shape()}});
    write_blob(fs::path(dir) / (reg[i].name + ".bin"), *reg[i].tensor);
    write_blob(fs::path(dir) / (reg[i].name + ".m.bin"), opt.m[i]);
    write_blob(fs::path(dir) / (reg[i].name + ".v.bin"), opt.v[i]);
  }
  manifest["params"] = std::move(plist);

  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!out) throw ValidationError("cannot write checkpoint manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

namespace {

json read_manifest(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw ValidationError("no checkpoint manifest in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw IncompatibilityError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format_version", -1) != kFormatVersion)
    throw IncompatibilityError("unsupported checkpoint format version");
  return manifest;
}

}  // namespace

TrainConfig peek_config(const std::string& dir) {
  json manifest = read_manifest(dir);
  return TrainConfig::from_json_string(manifest.at("config").dump());
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  json manifest = read_manifest(dir);
  TrainConfig cfg = TrainConfig::from_json_string(manifest.at("config").dump());
  if (cfg.hash() != manifest.value("config_hash", ""))
    throw IncompatibilityError("checkpoint config hash mismatch");

  LoadedCheckpoint ck;
  ck.params = init_params(cfg, manifest.at("input_dim").get<int>(),
                          manifest.at("node_count").get<int>(),
                          manifest.at("class_count").get<int>(), cfg.seed);
  ck.epoch = manifest.at("epoch").get<int>();

  auto reg = ck.params.registry();
  const json& plist = manifest.at("params");
  if (plist.size() != reg.size())
    throw IncompatibilityError("checkpoint parameter list does not match the config");

  AdamConfig acfg;
  acfg.lr = manifest.at("adam").at("lr").get<double>();
  acfg.beta1 = manifest.at("adam").at("beta1").get<double>();
  acfg.beta2 = manifest.at("adam").at("beta2").get<double>();
  acfg.eps = manifest.at("adam").at("eps").get<double>();
  std::vector<const Tensor*> ptrs;
  for (auto& np : reg) ptrs.push_back(np.tensor);
  ck.opt = adam_init(ptrs, acfg);
  ck.opt.step = manifest.at("step").get<long>();

  for (std::size_t i = 0; i < reg.size(); ++i) {
    const json& entry = plist[i];
    if (entry.at("name").get<std::string>() != reg[i].name)
      throw IncompatibilityError("checkpoint parameter order mismatch at " + reg[i].name);
    const auto shape = entry.at("shape").get<std::vector<int>>();
    if (shape != reg[i].tensor->shape())
      throw IncompatibilityError("checkpoint shape mismatch for " + reg[i].name + ": stored " +
                                 shape_str(shape) + ", expected " +
                                 shape_str(reg[i].tensor->shape()));
    read_blob(fs::path(dir) / (reg[i].name + ".bin"), *reg[i].tensor);
    read_blob(fs::path(dir) / (reg[i].name + ".m.bin"), ck.opt.m[i]);
    read_blob(fs::path(dir) / (reg[i].name + ".v.bin"), ck.opt.v[i]);
  }
  return ck;
}

}  // namespace hge
