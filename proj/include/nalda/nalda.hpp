#pragma once

// Supervised topic modeling by message passing over a word network: BP-LDA
// updates expressed as neighborhood aggregations, extended with label edges,
// pre-trained word-embedding factors and a nonlinear prediction head trained
// by alternating inference and SGD.

#include "nalda/bp.hpp"
#include "nalda/checkpoint.hpp"
#include "nalda/corpus.hpp"
#include "nalda/embed.hpp"
#include "nalda/embeddings.hpp"
#include "nalda/errors.hpp"
#include "nalda/eval.hpp"
#include "nalda/head.hpp"
#include "nalda/matrix.hpp"
#include "nalda/message_state.hpp"
#include "nalda/parallel.hpp"
#include "nalda/rng.hpp"
#include "nalda/supervised.hpp"
#include "nalda/synth.hpp"
#include "nalda/trainer.hpp"
