// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/conditioning.hpp"

#include <cmath>

#include "cunet/errors.hpp"
#include "doctest.h"

using namespace cunet;

TEST_CASE("one_hot builds the task selector") {
  CHECK(one_hot(1, 4).weights == std::vector<double>{0, 1, 0, 0});
  CHECK(one_hot(0, 4).weights == std::vector<double>{1, 0, 0, 0});
  CHECK(one_hot(3, 4).weights == std::vector<double>{0, 0, 0, 1});
  CHECK_THROWS_AS(one_hot(4, 4), IndexError);
  CHECK_THROWS_AS(one_hot(-1, 4), IndexError);
}

TEST_CASE("film_apply affine transforms") {
  Tensor4 x(1, 2, 1, 2);
  x.d = {1, 2, 3, 4};  // channel 0: [1,2], channel 1: [3,4]

  SUBCASE("identity") {
    Tensor4 y = film_apply(x, {1.0}, {0.0}, FilmMode::Simple);
    CHECK(y.d == x.d);
  }
  SUBCASE("constant output") {
    Tensor4 y = film_apply(x, {0.0}, {5.0}, FilmMode::Simple);
    for (double v : y.d) CHECK(v == 5.0);
  }
  SUBCASE("per-channel complex transform") {
    Tensor4 y = film_apply(x, {2.0, -1.0}, {0.0, 1.0}, FilmMode::Complex);
    CHECK(y.d == std::vector<double>{2, 4, -2, -3});
  }
  SUBCASE("channel mismatch throws") {
    CHECK_THROWS_AS(film_apply(x, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, FilmMode::Complex),
                    ShapeError);
  }
  SUBCASE("shape is preserved") {
    Rng rng(3);
    Tensor4 big(2, 4, 5, 7);
    for (double& v : big.d) v = rng.normal();
    Tensor4 y = film_apply(big, {1.3}, {-0.2}, FilmMode::Simple);
    CHECK(y.same_shape(big));
  }
}

TEST_CASE("simple mode equals complex mode with constant vectors") {
  Rng rng(17);
  Tensor4 x(2, 6, 3, 4);
  for (double& v : x.d) v = rng.normal();
  const double g = 1.7, b = -0.4;
  Tensor4 simple = film_apply(x, {g}, {b}, FilmMode::Simple);
  Tensor4 complex_t = film_apply(x, std::vector<double>(6, g), std::vector<double>(6, b),
                                 FilmMode::Complex);
  for (size_t i = 0; i < x.d.size(); ++i)
    CHECK(simple.d[i] == doctest::Approx(complex_t.d[i]).epsilon(1e-6));
}

TEST_CASE("generator emits the documented FiLM cardinalities") {
  for (EmbeddingKind emb : {EmbeddingKind::FullyConnected, EmbeddingKind::Cnn}) {
    GeneratorConfig cfg;
    cfg.embedding = emb;
    cfg.n_tasks = 4;

    SUBCASE("simple mode: 6 gammas + 6 betas") {
      cfg.film_mode = FilmMode::Simple;
      ParamStore store;
      Rng rng(1);
      Generator gen(cfg, store, rng);
      FiLMParamSet s = generator_forward(one_hot(1, 4), gen, Mode::Eval);
      CHECK(s.gammas.size() == 6);
      CHECK(s.betas.size() == 6);
      CHECK(s.total_values() == 12);
      for (const auto& g : s.gammas) CHECK(g.size() == 1);
    }
    SUBCASE("complex mode: 2016 values over depths 16..512") {
      cfg.film_mode = FilmMode::Complex;
      ParamStore store;
      Rng rng(1);
      Generator gen(cfg, store, rng);
      FiLMParamSet s = generator_forward(one_hot(2, 4), gen, Mode::Eval);
      CHECK(s.total_values() == 2016);
      const std::vector<int> expect = {16, 32, 64, 128, 256, 512};
      REQUIRE(s.gammas.size() == expect.size());
      for (size_t d = 0; d < expect.size(); ++d)
        CHECK(static_cast<int>(s.gammas[d].size()) == expect[d]);
    }
  }
}

TEST_CASE("generator inference is deterministic") {
  GeneratorConfig cfg;
  cfg.film_mode = FilmMode::Complex;
  ParamStore store;
  Rng rng(5);
  Generator gen(cfg, store, rng);
  FiLMParamSet a = generator_forward(one_hot(0, 4), gen, Mode::Eval);
  FiLMParamSet b = generator_forward(one_hot(0, 4), gen, Mode::Eval);
  for (size_t d = 0; d < a.gammas.size(); ++d) {
    CHECK(a.gammas[d] == b.gammas[d]);
    CHECK(a.betas[d] == b.betas[d]);
  }
}

TEST_CASE("unbound generator reports uninitialized weights") {
  Generator gen;
  CHECK_THROWS_AS(generator_forward(one_hot(0, 4), gen, Mode::Eval), StateError);
}

TEST_CASE("FiLM cardinality is independent of n_tasks") {
  for (int n_tasks : {2, 4, 7}) {
    GeneratorConfig cfg;
    cfg.n_tasks = n_tasks;
    cfg.film_mode = FilmMode::Complex;
    ParamStore store;
    Rng rng(2);
    Generator gen(cfg, store, rng);
    FiLMParamSet s = generator_forward(one_hot(0, n_tasks), gen, Mode::Eval);
    CHECK(s.total_values() == 2016);
  }
}

TEST_CASE("generator parameter counts per embedding") {
  // Dense and conv blocks resolved from the film mode; counts are exact.
  GeneratorConfig cfg;
  cfg.n_tasks = 4;

  cfg.embedding = EmbeddingKind::FullyConnected;
  cfg.film_mode = FilmMode::Simple;
  // 4*16+16, 16*64+64 + 2*64, 64*256+256 + 2*256, 2*(256*6+6)
  CHECK(generator_param_count(cfg) == 80u + 1088u + 128u + 16640u + 512u + 3084u);

  cfg.film_mode = FilmMode::Complex;
  CHECK(generator_param_count(cfg) ==
        80u + (16u * 256 + 256) + 512u + (256u * 1024 + 1024) + 2048u +
            2u * (1024u * 1008 + 1008));

  cfg.embedding = EmbeddingKind::Cnn;
  cfg.film_mode = FilmMode::Simple;
  // conv k=4: 4*16+16, 4*16*32+32 + bn 64, 4*32*64+64 + bn 128, heads 2*(64*6+6)
  CHECK(generator_param_count(cfg) == 80u + 2080u + 64u + 8256u + 128u + 780u);

  cfg.film_mode = FilmMode::Complex;
  CHECK(generator_param_count(cfg) ==
        160u + (4u * 32 * 64 + 64) + 128u + (4u * 64 * 256 + 256) + 512u +
            2u * (256u * 1008 + 1008));
}

TEST_CASE("head activations are linear: a trained probe exceeds [-1, 1]") {
  GeneratorConfig cfg;
  cfg.film_mode = FilmMode::Simple;
  ParamStore store;
  Rng rng(9);
  Generator gen(cfg, store, rng);

  // Push every gamma towards 3 and every beta towards -2 with plain SGD on
  // a quadratic loss; a bounded head could never cross +-1.
  Mat z(1, 4);
  z(0, 1) = 1.0;
  for (int iter = 0; iter < 400; ++iter) {
    Mat gammas, betas;
    Generator::Cache cache;
    gen.forward(z, Mode::Train, nullptr, gammas, betas, &cache);
    Mat dg(1, gammas.cols()), db(1, betas.cols());
    for (int i = 0; i < gammas.cols(); ++i) {
      dg(0, i) = 2.0 * (gammas(0, i) - 3.0);
      db(0, i) = 2.0 * (betas(0, i) + 2.0);
    }
    store.zero_grad();
    gen.backward(cache, dg, db);
    for (Param& p : store.params())
      for (size_t i = 0; i < p.w.size(); ++i) p.w[i] -= 0.02 * p.g[i];
  }
  Mat gammas, betas;
  gen.forward(z, Mode::Eval, nullptr, gammas, betas, nullptr);
  for (int i = 0; i < gammas.cols(); ++i) {
    CHECK(gammas(0, i) > 2.0);
    CHECK(betas(0, i) < -1.5);
  }
}

TEST_CASE("gamma head starts near the identity transform") {
  GeneratorConfig cfg;
  ParamStore store;
  Rng rng(4);
  Generator gen(cfg, store, rng);
  FiLMParamSet s = generator_forward(one_hot(0, 4), gen, Mode::Eval);
  for (const auto& g : s.gammas)
    for (double v : g) CHECK(std::fabs(v - 1.0) < 0.5);
}
