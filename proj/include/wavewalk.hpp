#pragma once

#include "wavewalk/boundary_data.hpp"
#include "wavewalk/errors.hpp"
#include "wavewalk/estimator.hpp"
#include "wavewalk/exit.hpp"
#include "wavewalk/geometry.hpp"
#include "wavewalk/sampling.hpp"
#include "wavewalk/stats.hpp"
#include "wavewalk/verify.hpp"
