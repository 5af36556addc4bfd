#pragma once

#include "ctsg/error.hpp"
#include "ctsg/rng.hpp"
#include "ctsg/tensor.hpp"
#include "ctsg/autodiff.hpp"
#include "ctsg/optim.hpp"
#include "ctsg/linalg.hpp"
#include "ctsg/textconfig.hpp"
#include "ctsg/parallel.hpp"
#include "ctsg/dataio.hpp"
#include "ctsg/expr.hpp"
#include "ctsg/constraints.hpp"
#include "ctsg/schedule.hpp"
#include "ctsg/denoiser.hpp"
#include "ctsg/diffusion.hpp"
#include "ctsg/qp.hpp"
#include "ctsg/nlp.hpp"
#include "ctsg/cop.hpp"
#include "ctsg/eval.hpp"
