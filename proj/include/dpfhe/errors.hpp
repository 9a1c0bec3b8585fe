// Copyright 2026 The dpfhe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace dpfhe {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (bad bounds, bad format, n over
// the configured limit, ...). The CLI maps this family to exit code 2.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A fixed-point result left the representable range of its format.
class OverflowError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// A ciphertext was decrypted under a key other than the one that produced it,
// or a gate mixed ciphertexts of two different keys.
class KeyMismatchError : public Error {
 public:
  using Error::Error;
};

// Gate operands were produced by two different backend instances.
class BackendMismatchError : public Error {
 public:
  using Error::Error;
};

// The privacy budget for a dataset was already spent.
class BudgetExhaustedError : public Error {
 public:
  using Error::Error;
};

// The decryption server refused to decrypt a ciphertext that carries no valid
// DP-protection capability.
class DecryptionRefusedError : public Error {
 public:
  using Error::Error;
};

// The encrypted pipeline and the plaintext oracle disagreed.
class EquivalenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpfhe
