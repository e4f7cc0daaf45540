/* Copyright 2026 The clasp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <cmath>
#include <cstdint>
#include <vector>

#include "clasp/rng.hpp"
#include "doctest.h"

using clasp::Rng;

TEST_CASE("same seed reproduces the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 64; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("split streams are deterministic and independent of consumption") {
  Rng parent(7);
  Rng before = parent.split(3);
  for (int i = 0; i < 100; ++i) parent.next_u64();
  Rng after = parent.split(3);
  for (int i = 0; i < 16; ++i) CHECK(before.next_u64() == after.next_u64());
}

TEST_CASE("split streams differ per index and from the parent") {
  Rng parent(7);
  Rng s1 = parent.split(1);
  Rng s2 = parent.split(2);
  Rng p = parent;
  int same12 = 0, same1p = 0;
  for (int i = 0; i < 64; ++i) {
    const uint64_t a = s1.next_u64(), b = s2.next_u64(), c = p.next_u64();
    same12 += a == b;
    same1p += a == c;
  }
  CHECK(same12 == 0);
  CHECK(same1p == 0);
}

TEST_CASE("uniform stays in range") {
  Rng r(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-3.0, 5.0);
    CHECK(u >= -3.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("below is bounded and hits every residue") {
  Rng r(13);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const uint64_t v = r.below(7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int k = 0; k < 7; ++k) CHECK(hits[k] > 700);
}

TEST_CASE("normal has unit moments") {
  Rng r(17);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0) < 0.02);
}

TEST_CASE("scaled normal applies mean and stddev") {
  Rng r(19);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal(5.0, 0.5);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::fabs(mean - 5.0) < 0.01);
  CHECK(std::fabs(var - 0.25) < 0.01);
}
