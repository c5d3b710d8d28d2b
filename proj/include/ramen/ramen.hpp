#pragma once

#include "ramen/numerics/tensor.hpp"
#include "ramen/numerics/ops.hpp"
#include "ramen/numerics/nn.hpp"
#include "ramen/numerics/optim.hpp"
#include "ramen/numerics/gradcheck.hpp"
#include "ramen/encodings.hpp"
#include "ramen/projector.hpp"
#include "ramen/resampler.hpp"
#include "ramen/temporal.hpp"
#include "ramen/mae.hpp"
#include "ramen/model.hpp"
#include "ramen/corpus.hpp"
#include "ramen/checkpoint.hpp"
#include "ramen/flops.hpp"
#include "ramen/training.hpp"
#include "ramen/gradcheck_suite.hpp"
