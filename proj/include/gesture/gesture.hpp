#pragma once

#include "gesture/config.hpp"
#include "gesture/core.hpp"
#include "gesture/descriptor.hpp"
#include "gesture/evaluation.hpp"
#include "gesture/io.hpp"
#include "gesture/nn/activation.hpp"
#include "gesture/nn/bilstm.hpp"
#include "gesture/nn/mlp.hpp"
#include "gesture/nn/model_io.hpp"
#include "gesture/nn/optim.hpp"
#include "gesture/pipeline.hpp"
#include "gesture/recurrent_labeler.hpp"
#include "gesture/rng.hpp"
#include "gesture/segmenter.hpp"
#include "gesture/skeleton.hpp"
#include "gesture/synth.hpp"
#include "gesture/window_classifier.hpp"
