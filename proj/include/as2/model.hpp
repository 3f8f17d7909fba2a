#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "as2/autograd.hpp"
#include "as2/corpus.hpp"
#include "as2/encode.hpp"
#include "as2/tensor.hpp"
#include "as2/text.hpp"

namespace as2 {

// Scoring variants. base: question/answer pair. loc_t: triplet with the
// neighboring sentences in one sequence. loc_e: ensemble of three pair
// encoders. glob_b: pair + projected document BOW. glob_e: pair + frozen
// document embedding. dual: triplet + projected BOW.
enum class Variant { kBase, kLocT, kLocE, kGlobB, kGlobE, kDual };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const std::vector<Variant>& all_variants();

bool variant_uses_triplet(Variant v);   // loc_t, dual
bool variant_uses_bow(Variant v);       // glob_b, dual
bool variant_uses_doc_embedding(Variant v);  // glob_e
bool variant_needs_documents(Variant v);
int n_segments(Variant v);              // 4 for triplet input, else 2
int head_width_factor(Variant v);       // head input = factor * d_model

struct ModelConfig {
  Variant variant = Variant::kBase;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 0;  // 0 -> 4 * d_model
  int max_len = 64;
  double ln_eps = 1e-5;
  double init_std = 0.02;
  std::uint64_t seed = 1;

  int resolved_d_ff() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  void validate() const;
};

struct EncoderParams {
  Tensor tok_table;  // vocab x d
  Tensor pos_table;  // max_len x d
  Tensor seg_table;  // n_segments x d
  struct Layer {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor w1, b1, w2, b2;
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
  };
  std::vector<Layer> layers;
  Tensor lnf_g, lnf_b;  // final norm on the residual stream
};

struct HeadParams {
  Tensor w;  // head_in x 1
  Tensor b;  // 1
};

struct Model {
  ModelConfig config;
  Vocabulary vocab;
  EncoderParams encoder;                 // every variant except loc_e
  std::vector<EncoderParams> branches;   // loc_e: prev / target / next
  Tensor shared_cls;                     // loc_e: the one shared [CLS] row
  HeadParams head;
  ProjectionMatrix projection;                    // glob_b / dual
  std::optional<EncoderParams> frozen_doc_encoder;  // glob_e, never trained
};

// Deterministic initialization: N(0, 0.02) weights, zero biases and norm
// shifts, unit norm scales, all drawn from config.seed in a fixed order.
Model init_model(const ModelConfig& config, Vocabulary vocab);

// glob_e's frozen snapshot comes from a trained base model of equal shape
void set_frozen_doc_encoder(Model& model, const Model& base_model);

struct ParamRef {
  std::string name;
  Tensor* tensor;
};
// Trainable tensors in a fixed order (the frozen doc encoder and the
// projection are excluded).
std::vector<ParamRef> trainable_params(Model& model);
std::vector<ParamRef> trainable_params(const Model& model);
void enumerate_encoder_params(const std::string& prefix, EncoderParams& p,
                              std::vector<ParamRef>& out);

// ---- forward ----

struct EncoderBinding {
  NodeRef tok, pos, seg;
  struct Layer {
    NodeRef wq, bq, wk, bk, wv, bv, wo, bo;
    NodeRef w1, b1, w2, b2;
    NodeRef ln1_g, ln1_b, ln2_g, ln2_b;
  };
  std::vector<Layer> layers;
  NodeRef lnf_g, lnf_b;
  std::optional<NodeRef> cls_override;
};

struct ModelBinding {
  std::vector<EncoderBinding> encoders;  // 1, or 3 for loc_e
  NodeRef head_w, head_b;
  // tape nodes of every trainable tensor, aligned with trainable_params()
  std::vector<NodeRef> param_nodes;
};

EncoderBinding bind_encoder(Tape& tape, const EncoderParams& p,
                            bool trainable,
                            std::optional<NodeRef> cls_override = {});
ModelBinding bind_model(Tape& tape, const Model& model);

// [CLS] output row (1 x d_model) after the pre-norm blocks
NodeRef encode_sequence_on_tape(Tape& tape, const TokenSequence& seq,
                                const EncoderBinding& b,
                                const ModelConfig& config);
Tensor encode_sequence(const Model& model, const TokenSequence& seq);

// Per-candidate model inputs, assembled once and reused across epochs.
struct ScoreInputs {
  std::vector<TokenSequence> seqs;  // 1 sequence, or 3 for loc_e
  Tensor global_feature;            // d_model; BOW projection or doc embedding
};

// Precomputed per-document features for one corpus.
class ScoringContext {
 public:
  ScoringContext(const Model& model, const AS2Corpus& corpus);
  const Tensor& global_feature(const std::string& doc_id) const;
  bool has_features() const { return !features_.empty(); }

 private:
  std::unordered_map<std::string, Tensor> features_;
};

ScoreInputs make_score_inputs(const Model& model, const std::string& question,
                              const Candidate& c, const ScoringContext& ctx);

NodeRef score_on_tape(Tape& tape, const Model& model, const ModelBinding& b,
                      const ScoreInputs& in);
double score(const Model& model, const std::string& question,
             const Candidate& c, const ScoringContext& ctx);

// Mean [CLS] embedding of all document sentences under a frozen encoder.
Tensor doc_embedding(const Document& doc, const EncoderParams& frozen,
                     const ModelConfig& config, const Vocabulary& vocab);

struct RankedGroup {
  std::vector<std::size_t> order;  // candidate indices, best first
  std::vector<double> logits;      // aligned with group.candidates
  std::size_t selected = 0;        // == order.front()
};

// Stable descending sort by logit; ties by ascending sent_index, then by
// candidate position.
RankedGroup rank_candidates(const Model& model, const QuestionGroup& group,
                            const ScoringContext& ctx);
RankedGroup rank_logits(const QuestionGroup& group,
                        const std::vector<double>& logits);

// ---- checkpoint ----

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace as2
