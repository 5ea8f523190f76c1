#pragma once

#include "spoofguard/adam.hpp"
#include "spoofguard/checkpoint.hpp"
#include "spoofguard/config.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/feature_dump.hpp"
#include "spoofguard/fft.hpp"
#include "spoofguard/grad_check.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/gru.hpp"
#include "spoofguard/lfcc.hpp"
#include "spoofguard/metrics.hpp"
#include "spoofguard/model_io.hpp"
#include "spoofguard/ohem.hpp"
#include "spoofguard/ops.hpp"
#include "spoofguard/parameters.hpp"
#include "spoofguard/protocol.hpp"
#include "spoofguard/raw_res2net.hpp"
#include "spoofguard/report.hpp"
#include "spoofguard/scores.hpp"
#include "spoofguard/sinc.hpp"
#include "spoofguard/synth.hpp"
#include "spoofguard/tensor.hpp"
#include "spoofguard/tiny_model.hpp"
#include "spoofguard/trainer.hpp"
#include "spoofguard/waveform.hpp"

namespace spoofguard {
inline constexpr const char* kVersion = "0.1.0";
}
