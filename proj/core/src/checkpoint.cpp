#include "dtsg/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <map>

#include <json.hpp>

#include "dtsg/error.hpp"

namespace dtsg {
namespace {

constexpr std::array<char, 8> kMagic{'D', 'T', 'S', 'G', 'C', 'K', 'P', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffU));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == EOF) throw Error("checkpoint", "truncated file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

Matrix get_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(get_u64(in));
  return m;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GroundingModel& model, const TrainState& state,
                     const FlatConfig& run_config, bool with_optimizer) {
  struct Entry {
    const Matrix* data;
    std::string name;
    ComponentTag tag;
    const char* kind;
  };
  std::vector<Entry> entries;
  for (const Parameter* p : model.params().all()) {
    entries.push_back({&p->value, p->name, p->tag, "value"});
    if (with_optimizer && p->m.size() == p->value.size()) {
      entries.push_back({&p->m, p->name, p->tag, "adam_m"});
      entries.push_back({&p->v, p->name, p->tag, "adam_v"});
    }
  }

  nlohmann::ordered_json manifest;
  manifest["format"] = 1;
  FlatConfig model_cfg;
  model.config().write_to(model_cfg);
  manifest["model_config"] = model_cfg.entries();
  manifest["vocabulary"] = model.vocab().tokens();
  manifest["epoch"] = state.epoch;
  manifest["step"] = state.step;
  manifest["rng_state"] = state.rng_state;
  manifest["best_val"] = state.best_val;
  manifest["best_epoch"] = state.best_epoch;
  const std::string config_text = run_config.dump();
  manifest["config"] = config_text;
  manifest["config_hash"] = hex64(fnv1a64(config_text));
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    manifest["tensors"].push_back({{"name", e.name},
                                   {"tag", std::string(to_string(e.tag))},
                                   {"kind", e.kind},
                                   {"shape", {e.data->rows(), e.data->cols()}},
                                   {"dtype", "float64"},
                                   {"offset", offset}});
    offset += static_cast<std::uint64_t>(e.data->size()) * 8;
  }

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("checkpoint", "cannot write " + tmp.string());
    const std::string text = manifest.dump();
    out.write(kMagic.data(), kMagic.size());
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : entries) put_matrix(out, *e.data);
    if (!out) throw Error("checkpoint", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint", "cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error("checkpoint", path.string() + " is not a checkpoint");
  const std::uint64_t len = get_u64(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("checkpoint", "truncated manifest in " + path.string());

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint", std::string("bad manifest: ") + e.what());
  }

  FlatConfig model_cfg;
  for (auto it = manifest.at("model_config").begin(); it != manifest.at("model_config").end(); ++it) {
    model_cfg.set(it.key(), it.value().get<std::string>());
  }
  const ModelConfig cfg = ModelConfig::from_config(model_cfg);
  Vocabulary vocab = Vocabulary::from_tokens(manifest.at("vocabulary").get<std::vector<std::string>>());

  bool branch = false;
  for (const auto& t : manifest.at("tensors")) {
    if (t.at("tag").get<std::string>() != "backbone") branch = true;
  }
  Checkpoint ck;
  ck.model = std::make_unique<GroundingModel>(cfg, std::move(vocab), 0, branch);
  ck.state.epoch = manifest.at("epoch").get<int>();
  ck.state.step = manifest.at("step").get<std::int64_t>();
  ck.state.rng_state = manifest.at("rng_state").get<std::string>();
  ck.state.best_val = manifest.at("best_val").get<double>();
  ck.state.best_epoch = manifest.at("best_epoch").get<int>();
  ck.config_text = manifest.at("config").get<std::string>();
  ck.config_hash = std::stoull(manifest.at("config_hash").get<std::string>(), nullptr, 16);

  const std::streamoff payload = in.tellg();
  std::map<std::string, bool> seen;
  for (const auto& t : manifest.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto kind = t.at("kind").get<std::string>();
    if (t.at("dtype").get<std::string>() != "float64") throw Error("checkpoint", name + ": unsupported dtype");
    Parameter* p = ck.model->params().find(name);
    if (p == nullptr) throw Error("checkpoint", "unknown tensor " + name);
    if (to_string(p->tag) != t.at("tag").get<std::string>()) throw Error("checkpoint", name + ": tag mismatch");
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) throw Error("checkpoint", name + ": shape mismatch");
    in.seekg(payload + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    Matrix m = get_matrix(in, rows, cols);
    if (kind == "value") {
      p->value = std::move(m);
      seen[name] = true;
    } else if (kind == "adam_m") {
      p->m = std::move(m);
      ck.has_optimizer_state = true;
    } else if (kind == "adam_v") {
      p->v = std::move(m);
    } else {
      throw Error("checkpoint", name + ": unknown tensor kind " + kind);
    }
  }
  for (const Parameter* p : ck.model->params().all()) {
    if (!seen.contains(p->name)) throw Error("checkpoint", "missing tensor " + p->name);
  }
  return ck;
}

std::unique_ptr<GroundingModel> export_backbone(const GroundingModel& model) {
  auto out = std::make_unique<GroundingModel>(model.config(), model.vocab(), 0, false);
  for (Parameter* p : out->params().all()) {
    const Parameter* src = model.params().find(p->name);
    if (src == nullptr || src->tag != ComponentTag::kBackbone) {
      throw Error("checkpoint", "source model lacks backbone tensor " + p->name);
    }
    p->value = src->value;
  }
  return out;
}

}  // namespace dtsg
