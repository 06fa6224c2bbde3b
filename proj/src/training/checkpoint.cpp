#include "expe/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "expe/error.hpp"
#include "expe/transformer/config_json.hpp"

namespace expe::train {

using nlohmann::json;

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : params) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

namespace {

template <typename T>
CheckpointTensor to_float(const std::string& name, const num::Shape& shape, std::span<const T> values) {
  CheckpointTensor out{name, shape, std::vector<float>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<float>(values[i]);
  return out;
}

template <typename T>
void copy_into(const CheckpointTensor& src, std::span<T> dst) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src.values[i]);
}

void check_shape(const CheckpointTensor* t, const std::string& name, const num::Shape& expected) {
  if (!t) throw CheckpointShapeError("tensor '" + name + "' missing from checkpoint");
  if (t->shape != expected) {
    throw CheckpointShapeError("tensor '" + name + "': checkpoint has " + num::shape_str(t->shape) + ", model expects " +
                               num::shape_str(expected));
  }
}

}  // namespace

template <typename T>
Checkpoint capture_checkpoint(nn::Transformer<T>& model, const num::AdamW<T>* optimizer, std::uint64_t step,
                              const std::optional<TrainConfig>& train) {
  Checkpoint ckpt;
  ckpt.model = model.config();
  ckpt.train = train;
  ckpt.step = step;
  ckpt.rng_state = model.dropout_rng().state();
  for (const auto& p : model.parameters()) {
    ckpt.params.push_back(to_float<T>(p.name, p.tensor.shape(), p.tensor.data()));
  }
  if (optimizer) {
    const auto& params = optimizer->params();
    const auto& states = optimizer->states();
    for (std::size_t i = 0; i < params.size(); ++i) {
      ckpt.adam_m.push_back(to_float<T>(params[i].name, params[i].tensor.shape(), states[i].m));
      ckpt.adam_v.push_back(to_float<T>(params[i].name, params[i].tensor.shape(), states[i].v));
      ckpt.adam_t = states[i].t;
    }
  }
  return ckpt;
}

template <typename T>
void restore_model(const Checkpoint& ckpt, nn::Transformer<T>& model) {
  auto params = model.parameters();
  for (const auto& p : params) check_shape(ckpt.find(p.name), p.name, p.tensor.shape());
  for (auto& p : params) copy_into(*ckpt.find(p.name), p.tensor.data());
  if (!ckpt.rng_state.empty()) model.dropout_rng().set_state(ckpt.rng_state);
}

template <typename T>
void restore_optimizer(const Checkpoint& ckpt, num::AdamW<T>& optimizer) {
  const auto& params = optimizer.params();
  if (ckpt.adam_m.size() != params.size() || ckpt.adam_v.size() != params.size()) {
    throw CheckpointShapeError("checkpoint optimizer state has " + std::to_string(ckpt.adam_m.size()) +
                               " tensors, optimizer has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i].name;
    for (const auto* t : {&ckpt.adam_m[i], &ckpt.adam_v[i]}) {
      if (t->name != name) throw CheckpointShapeError("optimizer state order differs at '" + name + "'");
      check_shape(t, name, params[i].tensor.shape());
    }
    auto& s = optimizer.states()[i];
    copy_into<T>(ckpt.adam_m[i], s.m);
    copy_into<T>(ckpt.adam_v[i], s.v);
    s.t = ckpt.adam_t;
  }
}

template <typename T>
nn::Transformer<T> model_from_checkpoint(const Checkpoint& ckpt) {
  nn::Transformer<T> model(ckpt.model, 0);
  restore_model(ckpt, model);
  return model;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_floats(std::string& out, const std::vector<float>& values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

json manifest_entry(const CheckpointTensor& t, const char* kind, std::uint64_t& offset) {
  json e = {{"name", t.name}, {"kind", kind}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}};
  offset += 4 * t.values.size();
  return e;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json header;
  header["config"] = nn::model_config_to_json(ckpt.model);
  header["training"] = ckpt.train ? train_config_to_json(*ckpt.train) : json(nullptr);
  header["step"] = ckpt.step;
  header["rng_state"] = ckpt.rng_state;
  header["adam_t"] = ckpt.adam_t;
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.params) manifest.push_back(manifest_entry(t, "param", offset));
  for (const auto& t : ckpt.adam_m) manifest.push_back(manifest_entry(t, "adam_m", offset));
  for (const auto& t : ckpt.adam_v) manifest.push_back(manifest_entry(t, "adam_v", offset));
  header["tensors"] = manifest;
  header["payload_bytes"] = offset;

  const auto header_text = header.dump();
  std::string out = "EXPE";
  put_u32(out, kCheckpointVersion);
  put_u64(out, header_text.size());
  out += header_text;
  out.reserve(out.size() + offset);
  for (const auto* group : {&ckpt.params, &ckpt.adam_m, &ckpt.adam_v}) {
    for (const auto& t : *group) put_floats(out, t.values);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint not found: " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  const std::string data = os.str();
  const auto where = " (" + path.string() + ")";

  if (data.size() < 16) throw CheckpointCorruptError("truncated checkpoint: only " + std::to_string(data.size()) + " bytes" + where);
  if (data.compare(0, 4, "EXPE") != 0) throw CheckpointCorruptError("bad magic, not a checkpoint" + where);
  const auto version = static_cast<std::uint32_t>(get_le(data, 4, 4));
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion) + where);
  }
  const auto header_len = get_le(data, 8, 8);
  if (header_len > data.size() - 16) throw CheckpointCorruptError("truncated checkpoint header" + where);

  json header;
  try {
    header = json::parse(data.begin() + 16, data.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw CheckpointCorruptError(std::string("malformed checkpoint header: ") + e.what() + where);
  }

  Checkpoint ckpt;
  try {
    ckpt.model = nn::model_config_from_json(header.at("config"));
    if (header.contains("training") && !header["training"].is_null()) {
      ckpt.train = train_config_from_json(header["training"]);
    }
    ckpt.step = header.at("step").get<std::uint64_t>();
    ckpt.rng_state = header.at("rng_state").get<std::string>();
    ckpt.adam_t = header.at("adam_t").get<std::uint64_t>();
    const auto payload_begin = 16 + header_len;
    const auto payload_size = data.size() - payload_begin;
    const auto expected = header.at("payload_bytes").get<std::uint64_t>();
    if (payload_size < expected) {
      throw CheckpointCorruptError("truncated checkpoint payload: " + std::to_string(payload_size) + " of " +
                                   std::to_string(expected) + " bytes" + where);
    }
    for (const auto& e : header.at("tensors")) {
      CheckpointTensor t;
      t.name = e.at("name").get<std::string>();
      t.shape = e.at("shape").get<num::Shape>();
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto count = e.at("count").get<std::uint64_t>();
      if (count != num::shape_numel(t.shape) || offset + 4 * count > payload_size) {
        throw CheckpointCorruptError("tensor '" + t.name + "' lies outside the payload" + where);
      }
      t.values.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        t.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(data, payload_begin + offset + 4 * i, 4)));
      }
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "param") {
        ckpt.params.push_back(std::move(t));
      } else if (kind == "adam_m") {
        ckpt.adam_m.push_back(std::move(t));
      } else if (kind == "adam_v") {
        ckpt.adam_v.push_back(std::move(t));
      } else {
        throw CheckpointCorruptError("unknown tensor kind '" + kind + "'" + where);
      }
    }
  } catch (const json::exception& e) {
    throw CheckpointCorruptError(std::string("malformed checkpoint header: ") + e.what() + where);
  } catch (const ConfigError& e) {
    throw CheckpointCorruptError(std::string("checkpoint carries an invalid config: ") + e.what());
  }

  // The manifest must describe exactly the model the embedded config builds.
  const nn::Transformer<float> reference(ckpt.model, 0);
  for (const auto& p : reference.parameters()) check_shape(ckpt.find(p.name), p.name, p.tensor.shape());
  return ckpt;
}

#define EXPE_INSTANTIATE_CHECKPOINT(T)                                                                         \
  template Checkpoint capture_checkpoint(nn::Transformer<T>&, const num::AdamW<T>*, std::uint64_t,             \
                                         const std::optional<TrainConfig>&);                                   \
  template void restore_model(const Checkpoint&, nn::Transformer<T>&);                                         \
  template void restore_optimizer(const Checkpoint&, num::AdamW<T>&);                                          \
  template nn::Transformer<T> model_from_checkpoint(const Checkpoint&);

EXPE_INSTANTIATE_CHECKPOINT(float)
EXPE_INSTANTIATE_CHECKPOINT(double)

}  // namespace expe::train
