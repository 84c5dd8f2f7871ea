#pragma once

#include "posetlim/error.hpp"
#include "posetlim/rng.hpp"
#include "posetlim/rational.hpp"
#include "posetlim/poset.hpp"
#include "posetlim/isomorphism.hpp"
#include "posetlim/poset_io.hpp"
#include "posetlim/density.hpp"
#include "posetlim/step_function.hpp"
#include "posetlim/step_io.hpp"
#include "posetlim/partition.hpp"
#include "posetlim/regularity.hpp"
#include "posetlim/cutnorm.hpp"
#include "posetlim/pipeline.hpp"
