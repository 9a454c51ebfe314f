// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "septfa/core/error.hpp"
#include "septfa/core/parallel.hpp"
#include "septfa/core/rng.hpp"
#include "septfa/signal/waveform.hpp"
#include "septfa/signal/wav.hpp"
#include "septfa/signal/fft.hpp"
#include "septfa/signal/stft.hpp"
#include "septfa/signal/features.hpp"
#include "septfa/nn/tensor.hpp"
#include "septfa/nn/param_store.hpp"
#include "septfa/nn/tape.hpp"
#include "septfa/nn/kernels.hpp"
#include "septfa/nn/checkpoint.hpp"
#include "septfa/separator/config.hpp"
#include "septfa/separator/mask_set.hpp"
#include "septfa/separator/spectral_ops.hpp"
#include "septfa/separator/model.hpp"
#include "septfa/separator/io.hpp"
#include "septfa/vad/vad.hpp"
#include "septfa/train/objectives.hpp"
#include "septfa/train/optimizer.hpp"
#include "septfa/train/trainer.hpp"
#include "septfa/train/gradcheck.hpp"
#include "septfa/sim/rir.hpp"
#include "septfa/sim/scene.hpp"
#include "septfa/sim/speech.hpp"
#include "septfa/sim/mixer.hpp"
#include "septfa/sim/dataset.hpp"
#include "septfa/stream/stream.hpp"
#include "septfa/eval/report.hpp"
