#pragma once

// Umbrella header for the divide-and-learn library.

#include "dal/assignment.hpp"
#include "dal/cart.hpp"
#include "dal/common.hpp"
#include "dal/dataset.hpp"
#include "dal/depth.hpp"
#include "dal/encoding.hpp"
#include "dal/evalstats.hpp"
#include "dal/learners.hpp"
#include "dal/model.hpp"
