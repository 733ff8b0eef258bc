// Copyright 2026 The roadcond Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace roadcond {

// Error categories map one-to-one onto CLI exit codes (usage=1, data=2,
// invariant=3).

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: bad manifests, unknown labels,
// out-of-range probabilities, corrupted bundles.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A guarantee the library is supposed to uphold was found broken at runtime
// (e.g. a leakage audit failed).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace roadcond
