#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "rprm/optimizer.hpp"
#include "rprm/param_store.hpp"
#include "rprm/util.hpp"

namespace rprm {

inline constexpr const char* kCheckpointFormat = "rprm.checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json meta;   // model-level metadata (variant, dims, flags)
  ParameterStore store;  // named slots with values (gradients are not persisted)
  std::optional<OptimizerState> opt;
};

inline std::string serialize_checkpoint(const ParameterStore& store,
                                        const OptimizerState* opt,
                                        const nlohmann::json& meta) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["meta"] = meta;
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : store.slots()) {
    nlohmann::json js;
    js["name"] = s.name;
    js["rows"] = s.shape.rows;
    js["cols"] = s.shape.cols;
    js["value"] = s.value;
    slots.push_back(std::move(js));
  }
  j["slots"] = std::move(slots);
  if (opt) {
    nlohmann::json jo;
    jo["step"] = opt->step;
    jo["lr"] = opt->cfg.lr;
    jo["beta1"] = opt->cfg.beta1;
    jo["beta2"] = opt->cfg.beta2;
    jo["eps"] = opt->cfg.eps;
    jo["m"] = opt->m;
    jo["v"] = opt->v;
    j["optimizer"] = std::move(jo);
  } else {
    j["optimizer"] = nullptr;
  }
  return j.dump() + "\n";
}

inline Checkpoint parse_checkpoint(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  require(!j.is_discarded(), "checkpoint is not valid JSON");
  require(j.value("format", "") == kCheckpointFormat, "not a checkpoint file");
  require(j.value("version", 0) == kCheckpointVersion, "unsupported checkpoint version");
  Checkpoint ck;
  ck.meta = j.value("meta", nlohmann::json::object());
  for (const auto& js : j.at("slots")) {
    const std::string name = js.at("name").get<std::string>();
    const int rows = js.at("rows").get<int>();
    const int cols = js.at("cols").get<int>();
    const int id = ck.store.add(name, Shape{rows, cols});
    auto& value = ck.store.slot(id).value;
    const auto& data = js.at("value");
    require(int(data.size()) == rows * cols, "slot data size mismatch: " + name);
    for (size_t k = 0; k < value.size(); ++k) value[k] = data[k].get<double>();
  }
  if (!j.at("optimizer").is_null()) {
    const auto& jo = j.at("optimizer");
    OptimizerState opt;
    opt.cfg.lr = jo.at("lr").get<double>();
    opt.cfg.beta1 = jo.at("beta1").get<double>();
    opt.cfg.beta2 = jo.at("beta2").get<double>();
    opt.cfg.eps = jo.at("eps").get<double>();
    opt.step = jo.at("step").get<long>();
    opt.m = jo.at("m").get<std::vector<std::vector<double>>>();
    opt.v = jo.at("v").get<std::vector<std::vector<double>>>();
    require(opt.initialized_for(ck.store), "optimizer state does not match checkpoint slots");
    ck.opt = std::move(opt);
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const ParameterStore& store,
                            const OptimizerState* opt, const nlohmann::json& meta) {
  write_file(path, serialize_checkpoint(store, opt, meta));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace rprm
