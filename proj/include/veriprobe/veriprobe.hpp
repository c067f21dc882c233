#pragma once

// Umbrella header for the whole library.

#include "veriprobe/analysis.hpp"
#include "veriprobe/conformal.hpp"
#include "veriprobe/datagen.hpp"
#include "veriprobe/error.hpp"
#include "veriprobe/evaluation.hpp"
#include "veriprobe/intervention.hpp"
#include "veriprobe/labels.hpp"
#include "veriprobe/mil.hpp"
#include "veriprobe/probes.hpp"
#include "veriprobe/svm.hpp"
#include "veriprobe/tensor_io.hpp"
