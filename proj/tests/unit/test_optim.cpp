#include <cmath>

#include "ccassg/error.hpp"
#include "ccassg/optim.hpp"
#include "doctest.h"

using namespace ccassg;

namespace {

// Scalar Adam with coupled weight decay, written from the update rule.
struct ScalarAdam {
  double lr, b1, b2, eps, wd;
  double m = 0, v = 0;
  int t = 0;
  double step(double w, double g) {
    g += wd * w;
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return w - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_CASE("Adam reproduces a reference trace from torch.optim.Adam") {
  // torch.optim.Adam(lr=0.1, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01), float64.
  DenseMatrix w{{1.0, -2.0, 0.5}};
  AdamState state({.lr = 0.1, .weight_decay = 0.01});
  const DenseMatrix grads[] = {{{0.3, -1.2, 0.0}}, {{-0.5, 0.7, 2.0}}, {{0.1, 0.1, -3.0}}};
  const double expected[3][3] = {{0.9000000032258063, -1.900000000819672, 0.4000001999996},
                                 {0.9271718400113178, -1.8777824258228135, 0.32541965347937474},
                                 {0.9359917438701106, -1.864347736819407, 0.3464935314514041}};
  for (int s = 0; s < 3; ++s) {
    DenseMatrix* p[] = {&w};
    const DenseMatrix* g[] = {&grads[s]};
    adam_step(state, p, g);
    for (int i = 0; i < 3; ++i) CHECK(w(0, i) == doctest::Approx(expected[s][i]).epsilon(1e-13));
  }
  CHECK(state.step == 3);
}

TEST_CASE("Adam matches the scalar update rule over many steps") {
  SeededRng rng(4);
  DenseMatrix w(2, 3);
  for (double& x : w.values()) x = rng.uniform(-1, 1);
  DenseMatrix b(1, 3, 0.5);
  AdamState state({.lr = 3e-3, .beta1 = 0.8, .beta2 = 0.99, .eps = 1e-6, .weight_decay = 1e-3});
  std::vector<ScalarAdam> ref(9, ScalarAdam{3e-3, 0.8, 0.99, 1e-6, 1e-3});
  std::vector<double> flat(w.values().begin(), w.values().end());
  flat.insert(flat.end(), b.values().begin(), b.values().end());
  for (int t = 0; t < 50; ++t) {
    DenseMatrix gw(2, 3), gb(1, 3);
    for (double& x : gw.values()) x = rng.normal();
    for (double& x : gb.values()) x = rng.normal();
    for (int i = 0; i < 6; ++i) flat[i] = ref[i].step(flat[i], gw.values()[i]);
    for (int i = 0; i < 3; ++i) flat[6 + i] = ref[6 + i].step(flat[6 + i], gb.values()[i]);
    DenseMatrix* p[] = {&w, &b};
    const DenseMatrix* g[] = {&gw, &gb};
    adam_step(state, p, g);
  }
  for (int i = 0; i < 6; ++i) CHECK(w.values()[i] == doctest::Approx(flat[i]).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) CHECK(b.values()[i] == doctest::Approx(flat[6 + i]).epsilon(1e-12));
}

TEST_CASE("Adam rejects bad inputs") {
  DenseMatrix w(2, 2);
  AdamState state;
  DenseMatrix* p[] = {&w};
  DenseMatrix wrong(2, 3);
  const DenseMatrix* bad_shape[] = {&wrong};
  CHECK_THROWS_AS(adam_step(state, p, bad_shape), ShapeError);

  DenseMatrix nan(2, 2);
  nan(1, 1) = NAN;
  const DenseMatrix* bad_value[] = {&nan};
  try {
    adam_step(state, p, bad_value);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("parameter 0") != std::string::npos);
  }

  DenseMatrix ok(2, 2, 1.0);
  const DenseMatrix* good[] = {&ok};
  adam_step(state, p, good);
  DenseMatrix w2(1, 1);
  DenseMatrix* two[] = {&w, &w2};
  DenseMatrix g2(1, 1);
  const DenseMatrix* two_g[] = {&ok, &g2};
  CHECK_THROWS_AS(adam_step(state, two, two_g), ShapeError);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  DenseMatrix w{{1.5, -0.25}};
  const DenseMatrix before = w;
  AdamState state({.lr = 0.0});
  DenseMatrix g{{3.0, 4.0}};
  DenseMatrix* p[] = {&w};
  const DenseMatrix* gs[] = {&g};
  adam_step(state, p, gs);
  CHECK(w == before);
}
