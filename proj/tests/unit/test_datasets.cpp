#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "doctest.h"

#include "clkan/datasets.hpp"

using namespace clkan;

namespace {

const Signature kC{0, 1, 0};

Multivector c(double re, double im) { return Multivector(kC, {re, im}); }

}  // namespace

TEST_CASE("formula examples") {
  const Algebra alg(kC);
  const std::vector<Multivector> i = {c(0, 1)};
  CHECK(evaluate_formula(alg, Task::Square, i) == c(-1, 0));
  const std::vector<Multivector> pair = {c(1, 2), c(3, -1)};
  CHECK(evaluate_formula(alg, Task::Mult, pair) == c(5, 5));
  // (1+2i)^2 + (3-i)^2 = (-3+4i) + (8-6i) = 5-2i, squared 21-20i.
  CHECK(evaluate_formula(alg, Task::SquareSquare, pair) == c(21, -20));

  const Signature q{0, 2, 0};
  const Algebra quat(q);
  const std::vector<Multivector> ij = {Multivector::blade(q, 1), Multivector::blade(q, 2)};
  CHECK(evaluate_formula(quat, Task::Mult, ij) == Multivector::blade(q, 3));

  const Signature dual{1, 0, 1};
  const Algebra d(dual);
  const std::vector<Multivector> e2 = {Multivector::blade(dual, 2)};
  CHECK(evaluate_formula(d, Task::Square, e2) == Multivector::zero(dual));

  CHECK_THROWS(evaluate_formula(alg, Task::Mult, i));
}

TEST_CASE("complex sine") {
  const Algebra alg(kC);
  const std::vector<Multivector> i = {c(0, 1)};
  const Multivector s = evaluate_formula(alg, Task::Sin, i);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == doctest::Approx(std::sinh(1.0)));
  for (double re : {-1.7, 0.3, 1.9})
    for (double im : {-0.8, 0.0, 1.4}) {
      const std::complex<double> ref = std::sin(std::complex<double>(re, im));
      const std::vector<Multivector> in = {c(re, im)};
      const Multivector out = evaluate_formula(alg, Task::Sin, in);
      CHECK(out[0] == doctest::Approx(ref.real()));
      CHECK(out[1] == doctest::Approx(ref.imag()));
    }
  const Algebra quat({0, 2, 0});
  const std::vector<Multivector> q = {Multivector::zero({0, 2, 0})};
  CHECK_THROWS_AS(evaluate_formula(quat, Task::Sin, q), ConfigError);
  CHECK_THROWS_AS(gen_formula(Task::Sin, {0, 2, 0}, 10, 0), ConfigError);
}

TEST_CASE("holography examples") {
  const Algebra alg(kC);
  const std::vector<Multivector> a = {c(1, 0), c(1, 0), c(0, 1)};
  CHECK(evaluate_formula(alg, Task::Holography, a) == c(2, 0));
  const std::vector<Multivector> b = {c(0.5, -1), c(1, 1), c(-1, -1)};
  CHECK(evaluate_formula(alg, Task::Holography, b) == c(0, 0));
  const std::vector<Multivector> e = {c(0, 2), c(0.5, 0), c(0.5, 1)};
  CHECK(evaluate_formula(alg, Task::Holography, e) == c(0, 4));
  CHECK_THROWS_AS(generate(Task::Holography, {0, 2, 0}, 10, 0), ConfigError);
}

TEST_CASE("generated data") {
  for (Task task : {Task::Square, Task::Sin, Task::Mult, Task::SquareSquare, Task::Holography}) {
    const Signature sig = kC;
    const Dataset d = generate(task, sig, 200, 7);
    CHECK(d.size() == 200);
    CHECK(d.arity == task_arity(task));
    CHECK(d.inputs.size() == 200 * d.arity * 2);
    for (double v : d.inputs) {
      CHECK(v >= -2.0);
      CHECK(v <= 2.0);
    }
    const Algebra alg(sig);
    for (std::size_t s = 0; s < d.size(); s += 17) {
      std::vector<Multivector> in;
      for (std::size_t a = 0; a < d.arity; ++a) in.push_back(d.input(s, a));
      CHECK(evaluate_formula(alg, task, in) == d.target(s));
    }
    CHECK(generate(task, sig, 200, 7).inputs == d.inputs);
    CHECK(generate(task, sig, 200, 8).inputs != d.inputs);
    CHECK(generate(task, sig, 200, 7, Split::Test).inputs != d.inputs);
  }
  const Dataset q = generate(Task::SquareSquare, {0, 2, 0}, 50, 1);
  CHECK(q.inputs.size() == 50 * 2 * 4);
  CHECK_THROWS_AS(generate(Task::Square, kC, 0, 1), ConfigError);
}

TEST_CASE("subset keeps rows in order") {
  const Dataset d = generate(Task::Mult, kC, 10, 2);
  const std::vector<std::size_t> idx = {7, 2};
  const Dataset s = d.subset(idx);
  CHECK(s.size() == 2);
  CHECK(s.target(0) == d.target(7));
  CHECK(s.input(1, 1) == d.input(2, 1));
}

TEST_CASE("default sample counts") {
  CHECK(sample_counts(kC, Task::Square).train_val == 5000);
  CHECK(sample_counts(kC, Task::Square).test == 5000);
  CHECK(sample_counts({0, 2, 0}, Task::Mult).train_val == 80000);
  CHECK(sample_counts({1, 0, 1}, Task::Square).test == 80000);
  CHECK(sample_counts(kC, Task::Holography).train_val == 100000);
}

TEST_CASE("CSV round trip") {
  const Dataset d = generate(Task::Mult, {1, 0, 1}, 25, 3);
  std::stringstream ss;
  write_csv(d, ss);
  const std::string text = ss.str();
  CHECK(text.rfind("x0_0,x0_1,x0_2,x0_3,x1_0", 0) == 0);
  const Dataset r = read_csv(ss, {1, 0, 1});
  CHECK(r.arity == 2);
  CHECK(r.inputs == d.inputs);
  CHECK(r.targets == d.targets);

  std::stringstream bad("x0_0,x0_1,y_0,y_1\n1,2,3,oops\n");
  CHECK_THROWS(read_csv(bad, kC));
  std::stringstream short_row("x0_0,x0_1,y_0,y_1\n1,2,3\n");
  CHECK_THROWS(read_csv(short_row, kC));
}

TEST_CASE("task names") {
  for (Task t : {Task::Square, Task::Sin, Task::Mult, Task::SquareSquare, Task::Holography})
    CHECK(task_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(task_from_string("cube"), ConfigError);
}
