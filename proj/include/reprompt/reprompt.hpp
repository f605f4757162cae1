/* Copyright 2026 The RePrompt Lab Authors. All Rights Reserved.

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

#ifndef REPROMPT_REPROMPT_HPP_
#define REPROMPT_REPROMPT_HPP_

#include "reprompt/config.hpp"
#include "reprompt/errors.hpp"
#include "reprompt/eval.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/grpo.hpp"
#include "reprompt/io.hpp"
#include "reprompt/policy.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/rng.hpp"
#include "reprompt/sft.hpp"
#include "reprompt/synthesizer.hpp"
#include "reprompt/variance.hpp"
#include "reprompt/vocabulary.hpp"

#endif  // REPROMPT_REPROMPT_HPP_
