// error.hpp
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
//
// \file
// Exception hierarchy shared by every indoasr module.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace indoasr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("empty corpus") {}
  explicit EmptyCorpus(const std::string& what) : Error(what) {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what) : Error(what) {}
};

// Malformed text input. line is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MissingField : public ParseError {
 public:
  MissingField(std::string field, std::size_t line)
      : ParseError("missing field \"" + field + "\"", line),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// ARPA section size disagrees with the \data\ header.
class CountMismatch : public Error {
 public:
  CountMismatch(int order, std::size_t declared, std::size_t found)
      : Error("ngram " + std::to_string(order) + ": header declares " +
              std::to_string(declared) + " entries, found " +
              std::to_string(found)) {}
};

class BadMagic : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

class TruncatedFile : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NotNormalized : public Error {
 public:
  using Error::Error;
};

class EmptyReference : public Error {
 public:
  explicit EmptyReference(const std::string& utterance)
      : Error("empty reference for utterance \"" + utterance + "\""),
        utterance_(utterance) {}
  const std::string& utterance() const { return utterance_; }

 private:
  std::string utterance_;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroVector : public Error {
 public:
  using Error::Error;
};

}  // namespace indoasr
