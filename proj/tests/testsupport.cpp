#include "testsupport.hpp"

#include <algorithm>
#include <cmath>

#include "as2/autograd.hpp"
#include "as2/corpus.hpp"
#include "as2/train.hpp"

namespace as2::testing {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double scale) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.gaussian() * scale;
  return t;
}

double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / denom;
}

FdReport fd_check(const std::vector<ParamRef>& params,
                  const std::function<double()>& loss_fn,
                  const std::function<std::vector<Tensor>()>& grad_fn,
                  double h) {
  std::vector<Tensor> analytic = grad_fn();
  FdReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p].tensor;
    for (std::size_t k = 0; k < theta.numel(); ++k) {
      double orig = theta.data[k];
      theta.data[k] = orig + h;
      double up = loss_fn();
      theta.data[k] = orig - h;
      double down = loss_fn();
      theta.data[k] = orig;
      double fd = (up - down) / (2.0 * h);
      double an = analytic[p].data[k];
      double re = rel_err(fd, an);
      if (re > report.max_rel) {
        report.max_rel = re;
        report.worst_param = params[p].name;
        report.worst_index = k;
        report.fd = fd;
        report.analytic = an;
      }
    }
  }
  return report;
}

double model_loss_value(const Model& model, const ScoreInputs& inputs,
                        int label) {
  Tape tape;
  ModelBinding b = bind_model(tape, model);
  NodeRef logit = score_on_tape(tape, model, b, inputs);
  NodeRef loss = tape.bce_with_logit(logit, label);
  return tape.value(loss).data[0];
}

std::vector<Tensor> model_loss_grads(const Model& model,
                                     const ScoreInputs& inputs, int label) {
  Tape tape;
  ModelBinding b = bind_model(tape, model);
  NodeRef logit = score_on_tape(tape, model, b, inputs);
  NodeRef loss = tape.bce_with_logit(logit, label);
  tape.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(b.param_nodes.size());
  for (NodeRef r : b.param_nodes) grads.push_back(tape.grad(r));
  return grads;
}

FdReport variant_fd_check(Variant variant, double h) {
  // tiny corpus: one question, one candidate with both neighbors, one doc
  AS2Corpus corpus;
  Document doc;
  doc.doc_id = "doc0";
  doc.sentences = {"the band played loud music .",
                   "she was born in 1986 .",
                   "many fans loved the show ."};
  corpus.documents.emplace(doc.doc_id, doc);
  QuestionGroup g;
  g.question_id = "q0";
  g.question = "when was she born ?";
  Candidate c;
  c.sentence = doc.sentences[1];
  c.doc_id = doc.doc_id;
  c.sent_index = 1;
  c.label = 1;
  g.candidates.push_back(c);
  corpus.groups.push_back(g);
  corpus = attach_context(std::move(corpus));

  Vocabulary vocab = build_corpus_vocab({&corpus}, 64, 1);

  ModelConfig cfg;
  cfg.variant = variant;
  cfg.d_model = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_len = 16;
  cfg.seed = 7;
  Model model = init_model(cfg, vocab);
  // healthy gradient magnitudes for the check
  Rng rng(11);
  for (ParamRef& p : trainable_params(model))
    if (p.name.find("ln") == std::string::npos &&
        p.name.find(".b") == std::string::npos)
      for (double& v : p.tensor->data) v = rng.gaussian() * 0.25;

  ScoringContext ctx(model, corpus);
  ScoreInputs inputs =
      make_score_inputs(model, g.question, corpus.groups[0].candidates[0], ctx);

  std::vector<ParamRef> params = trainable_params(model);
  auto loss_fn = [&] { return model_loss_value(model, inputs, 1); };
  auto grad_fn = [&] { return model_loss_grads(model, inputs, 1); };
  return fd_check(params, loss_fn, grad_fn, h);
}

}  // namespace as2::testing
