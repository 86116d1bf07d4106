// Copyright 2026 The MESE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef MESE_MESE_HPP_
#define MESE_MESE_HPP_

#include "mese/entropy.hpp"
#include "mese/error.hpp"
#include "mese/harness.hpp"
#include "mese/index_set.hpp"
#include "mese/intrinsic.hpp"
#include "mese/nn.hpp"
#include "mese/pushbox.hpp"
#include "mese/rng.hpp"
#include "mese/subspace.hpp"
#include "mese/trainer.hpp"

#endif  // MESE_MESE_HPP_
