#pragma once

#include "tlstm/checkpoint.hpp"
#include "tlstm/error.hpp"
#include "tlstm/features.hpp"
#include "tlstm/lstm.hpp"
#include "tlstm/metrics.hpp"
#include "tlstm/optim.hpp"
#include "tlstm/pipeline.hpp"
#include "tlstm/projection.hpp"
#include "tlstm/sym_eig.hpp"
#include "tlstm/synth.hpp"
#include "tlstm/telemetry.hpp"
#include "tlstm/tensor.hpp"
#include "tlstm/trainer.hpp"
#include "tlstm/windowing.hpp"
