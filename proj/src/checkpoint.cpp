#include <cstdio>
#include <fstream>

#include "as2/model.hpp"
#include "json.hpp"

// Checkpoint format: a single JSON file with the config, the vocabulary, and
// every tensor by name. The BOW projection is stored as its seed only; it is
// regenerated bit-identically on load.

namespace as2 {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape;
  j["data"] = t.data;
  return j;
}

Tensor tensor_from_json(const json& j, const std::string& name) {
  if (!j.contains("shape") || !j.contains("data"))
    throw parse_error("checkpoint tensor '" + name + "' missing shape/data");
  std::vector<std::size_t> shape = j["shape"].get<std::vector<std::size_t>>();
  std::vector<double> data = j["data"].get<std::vector<double>>();
  if (shape_numel(shape) != data.size())
    throw compat_error("checkpoint tensor '" + name + "' shape mismatch");
  return Tensor(std::move(shape), std::move(data));
}

void fill_params(const json& tensors, const std::vector<ParamRef>& refs,
                 const std::string& path) {
  for (const ParamRef& r : refs) {
    if (!tensors.contains(r.name))
      throw compat_error("checkpoint " + path + " is missing tensor '" +
                         r.name + "'");
    Tensor t = tensor_from_json(tensors[r.name], r.name);
    if (t.shape != r.tensor->shape)
      throw compat_error("checkpoint " + path + " tensor '" + r.name +
                         "' has shape " + t.shape_str() + ", expected " +
                         r.tensor->shape_str());
    *r.tensor = std::move(t);
  }
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "as2rank-checkpoint";
  j["variant"] = variant_name(m.config.variant);
  j["config"] = {{"d_model", m.config.d_model},
                 {"n_layers", m.config.n_layers},
                 {"n_heads", m.config.n_heads},
                 {"d_ff", m.config.resolved_d_ff()},
                 {"max_len", m.config.max_len},
                 {"ln_eps", m.config.ln_eps},
                 {"init_std", m.config.init_std},
                 {"seed", m.config.seed}};
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < m.vocab.size(); ++i)
    vocab.push_back(m.vocab.token_of(static_cast<int>(i)));
  j["vocab"] = vocab;
  json tensors = json::object();
  for (const ParamRef& r : trainable_params(m))
    tensors[r.name] = tensor_to_json(*r.tensor);
  j["tensors"] = std::move(tensors);
  if (variant_uses_bow(m.config.variant))
    j["projection_seed"] = m.projection.seed;
  if (m.frozen_doc_encoder) {
    std::vector<ParamRef> refs;
    enumerate_encoder_params(
        "frozen", const_cast<EncoderParams&>(*m.frozen_doc_encoder), refs);
    json fj = json::object();
    for (const ParamRef& r : refs) fj[r.name] = tensor_to_json(*r.tensor);
    j["frozen_doc_encoder"] = std::move(fj);
  }

  std::ofstream out(path);
  if (!out) throw input_error("cannot write checkpoint " + path);
  out << j.dump() << "\n";
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open checkpoint " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw parse_error("checkpoint " + path + ": " + e.what());
  }
  if (!j.contains("kind") || j["kind"] != "as2rank-checkpoint")
    throw compat_error("checkpoint " + path + " has unexpected kind");
  if (!j.contains("format_version") ||
      j["format_version"].get<int>() != kFormatVersion)
    throw compat_error("checkpoint " + path + " has unsupported format version");

  ModelConfig cfg;
  try {
    cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    const json& c = j.at("config");
    cfg.d_model = c.at("d_model").get<int>();
    cfg.n_layers = c.at("n_layers").get<int>();
    cfg.n_heads = c.at("n_heads").get<int>();
    cfg.d_ff = c.at("d_ff").get<int>();
    cfg.max_len = c.at("max_len").get<int>();
    cfg.ln_eps = c.at("ln_eps").get<double>();
    cfg.init_std = c.contains("init_std") ? c["init_std"].get<double>() : 0.02;
    cfg.seed = c.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw parse_error("checkpoint " + path + ": " + e.what());
  }

  Vocabulary vocab;
  {
    std::vector<std::string> toks =
        j.at("vocab").get<std::vector<std::string>>();
    // round-trip through the line format to reuse its validation
    std::string tmp = path + ".vocab.tmp";
    std::ofstream vout(tmp);
    for (const auto& t : toks) vout << t << "\n";
    vout.close();
    vocab = Vocabulary::load(tmp);
    std::remove(tmp.c_str());
  }

  Model m = init_model(cfg, std::move(vocab));
  fill_params(j.at("tensors"), trainable_params(m), path);
  if (variant_uses_bow(cfg.variant)) {
    std::uint64_t pseed = j.at("projection_seed").get<std::uint64_t>();
    m.projection = make_projection(
        m.vocab.size(), static_cast<std::size_t>(cfg.d_model), pseed);
  }
  if (variant_uses_doc_embedding(cfg.variant)) {
    if (!j.contains("frozen_doc_encoder"))
      throw compat_error("checkpoint " + path +
                         " is missing the frozen document encoder");
    std::vector<ParamRef> refs;
    enumerate_encoder_params("frozen", *m.frozen_doc_encoder, refs);
    fill_params(j["frozen_doc_encoder"], refs, path);
  }
  return m;
}

}  // namespace as2
