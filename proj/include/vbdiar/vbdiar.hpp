// Copyright 2026 The vbdiar Authors.
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


#ifndef VBDIAR_VBDIAR_HPP_
#define VBDIAR_VBDIAR_HPP_

#include "vbdiar/ahc.hpp"
#include "vbdiar/corpus_io.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/frame_vb.hpp"
#include "vbdiar/hmm.hpp"
#include "vbdiar/lda.hpp"
#include "vbdiar/metrics.hpp"
#include "vbdiar/overlap.hpp"
#include "vbdiar/pipeline.hpp"
#include "vbdiar/plda.hpp"
#include "vbdiar/rng.hpp"
#include "vbdiar/synth.hpp"
#include "vbdiar/transforms.hpp"
#include "vbdiar/vbhmm.hpp"

#endif  // VBDIAR_VBDIAR_HPP_
