#pragma once

#include "dialogkit/metrics/bleu.hpp"
#include "dialogkit/metrics/coherence.hpp"
#include "dialogkit/metrics/ngram.hpp"
#include "dialogkit/metrics/overlap.hpp"
#include "dialogkit/metrics/report.hpp"
