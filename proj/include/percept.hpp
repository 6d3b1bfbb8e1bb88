#pragma once

#include "percept/checkpoint.hpp"
#include "percept/config.hpp"
#include "percept/elvae.hpp"
#include "percept/error.hpp"
#include "percept/gradcheck.hpp"
#include "percept/image.hpp"
#include "percept/image_io.hpp"
#include "percept/losses.hpp"
#include "percept/metrics.hpp"
#include "percept/mmd.hpp"
#include "percept/nn.hpp"
#include "percept/optim.hpp"
#include "percept/rng.hpp"
#include "percept/selfcheck.hpp"
#include "percept/sr_eval.hpp"
#include "percept/synthetic.hpp"
#include "percept/train.hpp"
