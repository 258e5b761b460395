#pragma once

#include "dialogkit/train/checkpoint.hpp"
#include "dialogkit/train/control.hpp"
#include "dialogkit/train/corpus.hpp"
#include "dialogkit/train/lora.hpp"
#include "dialogkit/train/loss.hpp"
#include "dialogkit/train/optim.hpp"
#include "dialogkit/train/schedule.hpp"
#include "dialogkit/train/tiny_lm.hpp"
#include "dialogkit/train/trainer.hpp"
#include "dialogkit/train/tuner.hpp"
