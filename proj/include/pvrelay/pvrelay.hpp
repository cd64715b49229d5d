#pragma once

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/detect/event_detector.hpp"
#include "pvrelay/detect/gamma_tuning.hpp"
#include "pvrelay/detect/gwo.hpp"
#include "pvrelay/features/linear_trend.hpp"
#include "pvrelay/features/registry.hpp"
#include "pvrelay/features/stats.hpp"
#include "pvrelay/fuzzy/fuzzy_system.hpp"
#include "pvrelay/fuzzy/ga.hpp"
#include "pvrelay/learn/cv.hpp"
#include "pvrelay/learn/dataset.hpp"
#include "pvrelay/learn/forest.hpp"
#include "pvrelay/learn/metrics.hpp"
#include "pvrelay/learn/smote.hpp"
#include "pvrelay/learn/tree.hpp"
#include "pvrelay/pipeline/bundle.hpp"
#include "pvrelay/pipeline/config.hpp"
#include "pvrelay/pipeline/evaluate.hpp"
#include "pvrelay/pipeline/train.hpp"
#include "pvrelay/signal/corpus.hpp"
#include "pvrelay/signal/synth.hpp"
#include "pvrelay/signal/waveform.hpp"
