// ngram_lm.hpp
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
// Word n-gram language models: counting, estimation, ARPA and binary I/O,
// backoff queries.

#pragma once

#include "indoasr/lm/arpa.hpp"
#include "indoasr/lm/binary.hpp"
#include "indoasr/lm/counts.hpp"
#include "indoasr/lm/estimate.hpp"
#include "indoasr/lm/model.hpp"
