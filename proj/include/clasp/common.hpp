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
#ifndef CLASP_COMMON_HPP_
#define CLASP_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace clasp {

// Scalar type used by the product code paths. Tests instantiate the
// templated stack with double where finite-difference accuracy demands it.
using real = float;

// Process exit codes used by the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitMissingArtifact = 3,
  kExitNumericalFailure = 4,
};

// Bad or inconsistent configuration (flag conflicts, shape mismatches).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Missing or unreadable upstream artifact (dataset, checkpoint).
class ArtifactError : public std::runtime_error {
 public:
  explicit ArtifactError(const std::string& what) : std::runtime_error(what) {}
};

// I/O failures: truncated files, checksum mismatches, version tags.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses or gradients.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace clasp

#endif  // CLASP_COMMON_HPP_
