#include "as2/model.hpp"

#include <algorithm>
#include <cmath>

#include "as2/rng.hpp"

namespace as2 {

namespace {

constexpr double kMaskNeg = -1e30;

void fill_gaussian(Tensor& t, Rng& rng, double std_dev) {
  for (double& v : t.data) v = rng.gaussian() * std_dev;
}

EncoderParams init_encoder(const ModelConfig& cfg, std::size_t vocab_size,
                           int segments, Rng& rng) {
  const double kInitStd = cfg.init_std;
  std::size_t d = static_cast<std::size_t>(cfg.d_model);
  std::size_t ff = static_cast<std::size_t>(cfg.resolved_d_ff());
  EncoderParams p;
  p.tok_table = Tensor::zeros({vocab_size, d});
  p.pos_table = Tensor::zeros({static_cast<std::size_t>(cfg.max_len), d});
  p.seg_table = Tensor::zeros({static_cast<std::size_t>(segments), d});
  fill_gaussian(p.tok_table, rng, kInitStd);
  fill_gaussian(p.pos_table, rng, kInitStd);
  fill_gaussian(p.seg_table, rng, kInitStd);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.wq = Tensor::zeros({d, d});
    l.wk = Tensor::zeros({d, d});
    l.wv = Tensor::zeros({d, d});
    l.wo = Tensor::zeros({d, d});
    fill_gaussian(l.wq, rng, kInitStd);
    fill_gaussian(l.wk, rng, kInitStd);
    fill_gaussian(l.wv, rng, kInitStd);
    fill_gaussian(l.wo, rng, kInitStd);
    l.bq = Tensor::zeros({d});
    l.bk = Tensor::zeros({d});
    l.bv = Tensor::zeros({d});
    l.bo = Tensor::zeros({d});
    l.w1 = Tensor::zeros({d, ff});
    l.w2 = Tensor::zeros({ff, d});
    fill_gaussian(l.w1, rng, kInitStd);
    fill_gaussian(l.w2, rng, kInitStd);
    l.b1 = Tensor::zeros({ff});
    l.b2 = Tensor::zeros({d});
    l.ln1_g = Tensor::full({d}, 1.0);
    l.ln1_b = Tensor::zeros({d});
    l.ln2_g = Tensor::full({d}, 1.0);
    l.ln2_b = Tensor::zeros({d});
  }
  p.lnf_g = Tensor::full({d}, 1.0);
  p.lnf_b = Tensor::zeros({d});
  return p;
}

}  // namespace

void enumerate_encoder_params(const std::string& prefix, EncoderParams& p,
                              std::vector<ParamRef>& out) {
  out.push_back({prefix + ".tok_table", &p.tok_table});
  out.push_back({prefix + ".pos_table", &p.pos_table});
  out.push_back({prefix + ".seg_table", &p.seg_table});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    std::string lp = prefix + ".layer" + std::to_string(i);
    out.push_back({lp + ".wq", &l.wq});
    out.push_back({lp + ".bq", &l.bq});
    out.push_back({lp + ".wk", &l.wk});
    out.push_back({lp + ".bk", &l.bk});
    out.push_back({lp + ".wv", &l.wv});
    out.push_back({lp + ".bv", &l.bv});
    out.push_back({lp + ".wo", &l.wo});
    out.push_back({lp + ".bo", &l.bo});
    out.push_back({lp + ".w1", &l.w1});
    out.push_back({lp + ".b1", &l.b1});
    out.push_back({lp + ".w2", &l.w2});
    out.push_back({lp + ".b2", &l.b2});
    out.push_back({lp + ".ln1_g", &l.ln1_g});
    out.push_back({lp + ".ln1_b", &l.ln1_b});
    out.push_back({lp + ".ln2_g", &l.ln2_g});
    out.push_back({lp + ".ln2_b", &l.ln2_b});
  }
  out.push_back({prefix + ".lnf_g", &p.lnf_g});
  out.push_back({prefix + ".lnf_b", &p.lnf_b});
}

namespace {

EncoderBinding::Layer bind_layer(Tape& tape, const EncoderParams::Layer& l,
                                 bool trainable) {
  auto bind = [&](const Tensor& t) {
    return trainable ? tape.param(&t) : tape.input(&t);
  };
  EncoderBinding::Layer b;
  b.wq = bind(l.wq);
  b.bq = bind(l.bq);
  b.wk = bind(l.wk);
  b.bk = bind(l.bk);
  b.wv = bind(l.wv);
  b.bv = bind(l.bv);
  b.wo = bind(l.wo);
  b.bo = bind(l.bo);
  b.w1 = bind(l.w1);
  b.b1 = bind(l.b1);
  b.w2 = bind(l.w2);
  b.b2 = bind(l.b2);
  b.ln1_g = bind(l.ln1_g);
  b.ln1_b = bind(l.ln1_b);
  b.ln2_g = bind(l.ln2_g);
  b.ln2_b = bind(l.ln2_b);
  return b;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBase: return "base";
    case Variant::kLocT: return "loc_t";
    case Variant::kLocE: return "loc_e";
    case Variant::kGlobB: return "glob_b";
    case Variant::kGlobE: return "glob_e";
    case Variant::kDual: return "dual";
  }
  throw contract_error("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : all_variants())
    if (variant_name(v) == name) return v;
  throw config_error("unknown variant '" + name +
                     "' (expected base|loc_t|loc_e|glob_b|glob_e|dual)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::kBase,  Variant::kLocT,
                                         Variant::kLocE,  Variant::kGlobB,
                                         Variant::kGlobE, Variant::kDual};
  return v;
}

bool variant_uses_triplet(Variant v) {
  return v == Variant::kLocT || v == Variant::kDual;
}

bool variant_uses_bow(Variant v) {
  return v == Variant::kGlobB || v == Variant::kDual;
}

bool variant_uses_doc_embedding(Variant v) { return v == Variant::kGlobE; }

bool variant_needs_documents(Variant v) {
  return variant_uses_bow(v) || variant_uses_doc_embedding(v);
}

int n_segments(Variant v) { return variant_uses_triplet(v) ? 4 : 2; }

int head_width_factor(Variant v) {
  switch (v) {
    case Variant::kBase:
    case Variant::kLocT: return 1;
    case Variant::kLocE: return 3;
    case Variant::kGlobB:
    case Variant::kGlobE:
    case Variant::kDual: return 2;
  }
  throw contract_error("unknown variant");
}

void ModelConfig::validate() const {
  if (d_model < 1 || n_layers < 1 || n_heads < 1 || max_len < 10)
    throw config_error("model config out of range");
  if (d_model % n_heads != 0)
    throw config_error("d_model must be divisible by n_heads");
}

Model init_model(const ModelConfig& config, Vocabulary vocab) {
  config.validate();
  Model m;
  m.config = config;
  m.vocab = std::move(vocab);
  Rng rng(config.seed);
  std::size_t d = static_cast<std::size_t>(config.d_model);
  if (config.variant == Variant::kLocE) {
    for (int i = 0; i < 3; ++i)
      m.branches.push_back(
          init_encoder(config, m.vocab.size(), n_segments(config.variant), rng));
    m.shared_cls = Tensor::zeros({d});
    fill_gaussian(m.shared_cls, rng, config.init_std);
  } else {
    m.encoder =
        init_encoder(config, m.vocab.size(), n_segments(config.variant), rng);
  }
  std::size_t head_in = d * static_cast<std::size_t>(
                                head_width_factor(config.variant));
  m.head.w = Tensor::zeros({head_in, 1});
  fill_gaussian(m.head.w, rng, config.init_std);
  m.head.b = Tensor::zeros({1});
  if (variant_uses_bow(config.variant))
    m.projection =
        make_projection(m.vocab.size(), d, derive_seed(config.seed, 0x9b0u));
  if (variant_uses_doc_embedding(config.variant)) {
    // default snapshot: the freshly initialized encoder; replace with a
    // trained base encoder via set_frozen_doc_encoder
    m.frozen_doc_encoder = m.encoder;
  }
  return m;
}

void set_frozen_doc_encoder(Model& model, const Model& base_model) {
  if (!variant_uses_doc_embedding(model.config.variant))
    throw config_error("variant " + variant_name(model.config.variant) +
                       " takes no frozen document encoder");
  if (base_model.config.variant != Variant::kBase)
    throw compat_error("frozen document encoder must come from a base model");
  if (base_model.config.d_model != model.config.d_model ||
      base_model.config.n_layers != model.config.n_layers ||
      base_model.config.n_heads != model.config.n_heads ||
      base_model.config.resolved_d_ff() != model.config.resolved_d_ff() ||
      base_model.config.max_len != model.config.max_len ||
      base_model.vocab.size() != model.vocab.size())
    throw compat_error("frozen document encoder shape mismatch");
  model.frozen_doc_encoder = base_model.encoder;
}

std::vector<ParamRef> trainable_params(Model& m) {
  std::vector<ParamRef> out;
  if (m.config.variant == Variant::kLocE) {
    for (std::size_t i = 0; i < m.branches.size(); ++i)
      enumerate_encoder_params("branch" + std::to_string(i), m.branches[i], out);
    out.push_back({"shared_cls", &m.shared_cls});
  } else {
    enumerate_encoder_params("encoder", m.encoder, out);
  }
  out.push_back({"head.w", &m.head.w});
  out.push_back({"head.b", &m.head.b});
  return out;
}

std::vector<ParamRef> trainable_params(const Model& m) {
  return trainable_params(const_cast<Model&>(m));
}

EncoderBinding bind_encoder(Tape& tape, const EncoderParams& p, bool trainable,
                            std::optional<NodeRef> cls_override) {
  auto bind = [&](const Tensor& t) {
    return trainable ? tape.param(&t) : tape.input(&t);
  };
  EncoderBinding b;
  b.tok = bind(p.tok_table);
  b.pos = bind(p.pos_table);
  b.seg = bind(p.seg_table);
  for (const auto& l : p.layers) b.layers.push_back(bind_layer(tape, l, trainable));
  b.lnf_g = bind(p.lnf_g);
  b.lnf_b = bind(p.lnf_b);
  b.cls_override = cls_override;
  return b;
}

ModelBinding bind_model(Tape& tape, const Model& m) {
  // param nodes are created in trainable_params() order so gradients can be
  // gathered positionally
  ModelBinding b;
  std::uint32_t first = static_cast<std::uint32_t>(tape.size());
  if (m.config.variant == Variant::kLocE) {
    for (const auto& enc : m.branches)
      b.encoders.push_back(bind_encoder(tape, enc, true));
    NodeRef cls = tape.param(&m.shared_cls);
    for (auto& enc : b.encoders) enc.cls_override = cls;
  } else {
    b.encoders.push_back(bind_encoder(tape, m.encoder, true));
  }
  b.head_w = tape.param(&m.head.w);
  b.head_b = tape.param(&m.head.b);
  std::uint32_t last = static_cast<std::uint32_t>(tape.size());
  for (std::uint32_t i = first; i < last; ++i)
    b.param_nodes.push_back(NodeRef{i});
  return b;
}

NodeRef encode_sequence_on_tape(Tape& tape, const TokenSequence& seq,
                                const EncoderBinding& b,
                                const ModelConfig& config) {
  std::size_t L = seq.length();
  std::size_t d = static_cast<std::size_t>(config.d_model);
  std::size_t heads = static_cast<std::size_t>(config.n_heads);
  std::size_t dh = d / heads;

  NodeRef x = tape.embed(seq.token_ids, seq.segment_ids, b.tok, b.pos, b.seg,
                         b.cls_override);

  // additive key mask: padded positions never receive attention weight
  Tensor mask_bias = Tensor::zeros({L});
  for (std::size_t j = 0; j < L; ++j)
    mask_bias.data[j] = seq.mask[j] ? 0.0 : kMaskNeg;
  NodeRef mask_ref = tape.leaf(std::move(mask_bias), false);

  double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& l : b.layers) {
    NodeRef h = tape.layer_norm(x, l.ln1_g, l.ln1_b, config.ln_eps);
    NodeRef q = tape.affine(h, l.wq, l.bq);
    NodeRef k = tape.affine(h, l.wk, l.bk);
    NodeRef v = tape.affine(h, l.wv, l.bv);
    std::vector<NodeRef> mixed;
    for (std::size_t hi = 0; hi < heads; ++hi) {
      NodeRef qh = tape.slice_cols(q, hi * dh, dh);
      NodeRef kh = tape.slice_cols(k, hi * dh, dh);
      NodeRef vh = tape.slice_cols(v, hi * dh, dh);
      NodeRef scores = tape.scale(tape.matmul_nt(qh, kh), att_scale);
      scores = tape.add_rowvec(scores, mask_ref);
      NodeRef att = tape.softmax(scores);
      mixed.push_back(tape.matmul(att, vh));
    }
    NodeRef o = mixed.size() == 1 ? mixed[0] : tape.concat_cols(mixed);
    x = tape.add(x, tape.affine(o, l.wo, l.bo));
    NodeRef g = tape.layer_norm(x, l.ln2_g, l.ln2_b, config.ln_eps);
    NodeRef f = tape.affine(tape.gelu(tape.affine(g, l.w1, l.b1)), l.w2, l.b2);
    x = tape.add(x, f);
  }
  x = tape.layer_norm(x, b.lnf_g, b.lnf_b, config.ln_eps);
  return tape.take_row(x, 0);
}

Tensor encode_sequence(const Model& m, const TokenSequence& seq) {
  Tape tape;
  EncoderBinding b = bind_encoder(tape, m.encoder, false);
  NodeRef cls = encode_sequence_on_tape(tape, seq, b, m.config);
  return Tensor::vec(tape.value(cls).data);  // flatten the 1 x d row
}

ScoringContext::ScoringContext(const Model& m, const AS2Corpus& corpus) {
  if (!variant_needs_documents(m.config.variant)) return;
  // ordered iteration; features are pure per-document
  std::vector<const Document*> docs;
  docs.reserve(corpus.documents.size());
  for (const auto& [id, d] : corpus.documents) docs.push_back(&d);
  if (variant_uses_doc_embedding(m.config.variant) && !m.frozen_doc_encoder)
    throw config_error("glob_e model is missing its frozen document encoder");
  std::vector<Tensor> feats(docs.size());
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(docs.size());
       ++i) {
    const Document& doc = *docs[static_cast<std::size_t>(i)];
    try {
      feats[static_cast<std::size_t>(i)] =
          variant_uses_bow(m.config.variant)
              ? project_bow(doc_bow(doc, m.vocab), m.projection)
              : doc_embedding(doc, *m.frozen_doc_encoder, m.config, m.vocab);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw integrity_error(error);
  for (std::size_t i = 0; i < docs.size(); ++i)
    features_.emplace(docs[i]->doc_id, std::move(feats[i]));
}

const Tensor& ScoringContext::global_feature(const std::string& doc_id) const {
  auto it = features_.find(doc_id);
  if (it == features_.end())
    throw integrity_error("no document feature for doc_id '" + doc_id + "'");
  return it->second;
}

ScoreInputs make_score_inputs(const Model& m, const std::string& question,
                              const Candidate& c, const ScoringContext& ctx) {
  const Vocabulary& vocab = m.vocab;
  std::vector<int> q = vocab.encode(tokenize(question));
  std::vector<int> s = vocab.encode(tokenize(c.sentence));
  std::vector<int> prev =
      c.prev ? vocab.encode(tokenize(*c.prev)) : std::vector<int>{};
  std::vector<int> next =
      c.next ? vocab.encode(tokenize(*c.next)) : std::vector<int>{};
  std::size_t max_len = static_cast<std::size_t>(m.config.max_len);

  ScoreInputs in;
  switch (m.config.variant) {
    case Variant::kBase:
    case Variant::kGlobB:
    case Variant::kGlobE:
      in.seqs.push_back(assemble_pair(q, s, max_len));
      break;
    case Variant::kLocT:
    case Variant::kDual:
      in.seqs.push_back(assemble_triplet(q, prev, s, next, max_len));
      break;
    case Variant::kLocE:
      in.seqs.push_back(assemble_pair(q, prev, max_len));
      in.seqs.push_back(assemble_pair(q, s, max_len));
      in.seqs.push_back(assemble_pair(q, next, max_len));
      break;
  }
  if (variant_needs_documents(m.config.variant)) {
    if (!ctx.has_features())
      throw config_error("variant " + variant_name(m.config.variant) +
                         " needs document features; corpus has no documents");
    in.global_feature = ctx.global_feature(c.doc_id);
  }
  return in;
}

NodeRef score_on_tape(Tape& tape, const Model& m, const ModelBinding& b,
                      const ScoreInputs& in) {
  std::vector<NodeRef> features;
  if (m.config.variant == Variant::kLocE) {
    for (std::size_t i = 0; i < 3; ++i)
      features.push_back(
          encode_sequence_on_tape(tape, in.seqs[i], b.encoders[i], m.config));
  } else {
    features.push_back(
        encode_sequence_on_tape(tape, in.seqs[0], b.encoders[0], m.config));
  }
  if (variant_needs_documents(m.config.variant)) {
    Tensor g = Tensor::zeros({1, in.global_feature.numel()});
    g.data = in.global_feature.data;
    features.push_back(tape.leaf(std::move(g), false));
  }
  NodeRef head_in =
      features.size() == 1 ? features[0] : tape.concat_cols(features);
  return tape.affine(head_in, b.head_w, b.head_b);  // 1 x 1 logit
}

double score(const Model& m, const std::string& question, const Candidate& c,
             const ScoringContext& ctx) {
  ScoreInputs in = make_score_inputs(m, question, c, ctx);
  Tape tape;
  ModelBinding b = bind_model(tape, m);
  NodeRef logit = score_on_tape(tape, m, b, in);
  return tape.value(logit).data[0];
}

Tensor doc_embedding(const Document& doc, const EncoderParams& frozen,
                     const ModelConfig& config, const Vocabulary& vocab) {
  if (doc.sentences.empty())
    throw integrity_error("document '" + doc.doc_id + "' has no sentences");
  std::size_t d = static_cast<std::size_t>(config.d_model);
  Tensor mean = Tensor::zeros({d});
  for (const std::string& s : doc.sentences) {
    TokenSequence seq = assemble_single(
        vocab.encode(tokenize(s)), static_cast<std::size_t>(config.max_len));
    Tape tape;
    EncoderBinding b = bind_encoder(tape, frozen, false);
    NodeRef cls = encode_sequence_on_tape(tape, seq, b, config);
    const Tensor& v = tape.value(cls);
    for (std::size_t j = 0; j < d; ++j) mean.data[j] += v.data[j];
  }
  double inv = 1.0 / static_cast<double>(doc.sentences.size());
  for (double& v : mean.data) v *= inv;
  return mean;
}

RankedGroup rank_logits(const QuestionGroup& group,
                        const std::vector<double>& logits) {
  if (group.candidates.empty())
    throw input_error("question group '" + group.question_id +
                      "' has no candidates");
  RankedGroup r;
  r.logits = logits;
  r.order.resize(group.candidates.size());
  for (std::size_t i = 0; i < r.order.size(); ++i) r.order[i] = i;
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (logits[a] != logits[b]) return logits[a] > logits[b];
                     return group.candidates[a].sent_index <
                            group.candidates[b].sent_index;
                   });
  r.selected = r.order.front();
  return r;
}

RankedGroup rank_candidates(const Model& m, const QuestionGroup& group,
                            const ScoringContext& ctx) {
  std::vector<double> logits(group.candidates.size());
  for (std::size_t i = 0; i < group.candidates.size(); ++i)
    logits[i] = score(m, group.question, group.candidates[i], ctx);
  return rank_logits(group, logits);
}

}  // namespace as2
