// Kernel benchmark: serial reference vs OpenMP implementations, plus an
// end-to-end scoring throughput comparison at 1..N threads. Results from the
// two paths are checked to be bit-identical while timing.
//
//   bench_kernels [--quick]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "as2/corpus.hpp"
#include "as2/kernels.hpp"
#include "as2/model.hpp"
#include "as2/rng.hpp"
#include "as2/train.hpp"

using namespace as2;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.gaussian();
  return t;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  return std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(double)) == 0;
}

void bench_matmul(std::size_t n, int reps) {
  Rng rng(1);
  Tensor a = rand_tensor({n, n}, rng);
  Tensor b = rand_tensor({n, n}, rng);
  Tensor c_ref = Tensor::zeros({n, n});
  Tensor c_par = Tensor::zeros({n, n});
  double t_ref = time_best_of(reps, [&] {
    ref::mm_nn(a.data.data(), b.data.data(), c_ref.data.data(), n, n, n);
  });
  double t_par = time_best_of(reps, [&] {
    par::mm_nn(a.data.data(), b.data.data(), c_par.data.data(), n, n, n);
  });
  double flops = 2.0 * n * n * n;
  std::printf("mm_nn %4zu^3   ref %8.2f ms (%5.2f GF/s)   omp %8.2f ms "
              "(%5.2f GF/s)   x%.2f   %s\n",
              n, t_ref * 1e3, flops / t_ref / 1e9, t_par * 1e3,
              flops / t_par / 1e9, t_ref / t_par,
              same_bits(c_ref, c_par) ? "bitwise equal" : "MISMATCH");
}

void bench_elementwise(std::size_t n, int reps) {
  Rng rng(2);
  Tensor x = rand_tensor({n}, rng);
  Tensor y_ref = Tensor::zeros({n});
  Tensor y_par = Tensor::zeros({n});
  double t_ref = time_best_of(
      reps, [&] { ref::gelu(x.data.data(), y_ref.data.data(), n); });
  double t_par = time_best_of(
      reps, [&] { par::gelu(x.data.data(), y_par.data.data(), n); });
  std::printf("gelu  %7zu   ref %8.2f ms                omp %8.2f ms "
              "               x%.2f   %s\n",
              n, t_ref * 1e3, t_par * 1e3, t_ref / t_par,
              same_bits(y_ref, y_par) ? "bitwise equal" : "MISMATCH");
}

void bench_rows(std::size_t rows, std::size_t cols, int reps) {
  Rng rng(3);
  Tensor x = rand_tensor({rows, cols}, rng);
  Tensor g = rand_tensor({cols}, rng);
  Tensor b = rand_tensor({cols}, rng);
  Tensor y_ref = Tensor::zeros({rows, cols}), y_par = y_ref;
  Tensor mean = Tensor::zeros({rows}), rstd = mean, mean2 = mean, rstd2 = mean;
  double t_ref = time_best_of(reps, [&] {
    ref::layer_norm(x.data.data(), g.data.data(), b.data.data(), 1e-5,
                    y_ref.data.data(), mean.data.data(), rstd.data.data(),
                    rows, cols);
  });
  double t_par = time_best_of(reps, [&] {
    par::layer_norm(x.data.data(), g.data.data(), b.data.data(), 1e-5,
                    y_par.data.data(), mean2.data.data(), rstd2.data.data(),
                    rows, cols);
  });
  std::printf("lnorm %4zux%-4zu ref %8.2f ms                omp %8.2f ms "
              "               x%.2f   %s\n",
              rows, cols, t_ref * 1e3, t_par * 1e3, t_ref / t_par,
              same_bits(y_ref, y_par) ? "bitwise equal" : "MISMATCH");

  Tensor s_ref = Tensor::zeros({rows, cols}), s_par = s_ref;
  t_ref = time_best_of(reps, [&] {
    ref::softmax_rows(x.data.data(), s_ref.data.data(), rows, cols);
  });
  t_par = time_best_of(reps, [&] {
    par::softmax_rows(x.data.data(), s_par.data.data(), rows, cols);
  });
  std::printf("smax  %4zux%-4zu ref %8.2f ms                omp %8.2f ms "
              "               x%.2f   %s\n",
              rows, cols, t_ref * 1e3, t_par * 1e3, t_ref / t_par,
              same_bits(s_ref, s_par) ? "bitwise equal" : "MISMATCH");
}

// one training step over a small batch, at different thread counts
void bench_scoring(int reps) {
  AS2Corpus corpus;
  Document d;
  d.doc_id = "doc";
  d.sentences = {"the band played loud music tonight .",
                 "she was born in winter long ago .",
                 "many fans loved the late show ."};
  corpus.documents.emplace(d.doc_id, d);
  for (int g = 0; g < 16; ++g) {
    QuestionGroup grp;
    grp.question_id = "q" + std::to_string(g);
    grp.question = "when was she born ?";
    for (int i = 0; i < 3; ++i) {
      Candidate c;
      c.sentence = d.sentences[static_cast<std::size_t>(i)];
      c.doc_id = d.doc_id;
      c.sent_index = i;
      c.label = i == 1 ? 1 : 0;
      grp.candidates.push_back(c);
    }
    corpus.groups.push_back(grp);
  }
  corpus = attach_context(std::move(corpus));

  TrainConfig cfg;
  cfg.model.variant = Variant::kLocT;
  cfg.model.d_model = 64;
  cfg.model.n_layers = 2;
  cfg.model.n_heads = 4;
  cfg.model.d_ff = 128;
  cfg.model.max_len = 32;
  cfg.epochs = 1;
  cfg.batch_size = 48;
  cfg.runs = 1;

#ifdef _OPENMP
  int max_threads = omp_get_max_threads();
#else
  int max_threads = 1;
#endif
  for (int threads = 1; threads <= max_threads; threads *= 2) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    double t = time_best_of(reps, [&] {
      AS2Corpus dev = corpus;
      train_run(corpus, dev, cfg);
    });
    std::printf("train step (48 pairs, loc_t d64x2)  %d thread%s  %7.1f ms\n",
                threads, threads == 1 ? " " : "s", t * 1e3);
  }
#ifdef _OPENMP
  omp_set_num_threads(max_threads);
#endif
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  int reps = quick ? 2 : 5;
#ifdef _OPENMP
  std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("openmp disabled (serial build)\n");
#endif
  bench_matmul(quick ? 96 : 256, reps);
  if (!quick) bench_matmul(512, 3);
  bench_elementwise(quick ? 100000 : 4000000, reps);
  bench_rows(quick ? 256 : 2048, 256, reps);
  bench_scoring(quick ? 1 : 3);
  return 0;
}
