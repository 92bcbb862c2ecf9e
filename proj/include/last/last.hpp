#ifndef LAST_LAST_HPP_
#define LAST_LAST_HPP_

#include "last/baselines.hpp"
#include "last/data_io.hpp"
#include "last/evaluation.hpp"
#include "last/gradient_check.hpp"
#include "last/model.hpp"
#include "last/objective.hpp"
#include "last/rng.hpp"
#include "last/serialize.hpp"
#include "last/sgd.hpp"
#include "last/solver.hpp"
#include "last/types.hpp"

#endif  // LAST_LAST_HPP_
