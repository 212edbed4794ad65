#pragma once

#include "wavesynth/csv_io.hpp"
#include "wavesynth/error.hpp"
#include "wavesynth/metrics.hpp"
#include "wavesynth/patch_synth.hpp"
#include "wavesynth/pipeline.hpp"
#include "wavesynth/processes.hpp"
#include "wavesynth/random.hpp"
#include "wavesynth/time_series.hpp"
#include "wavesynth/version.hpp"
#include "wavesynth/wavelet.hpp"
