#pragma once

#include "vfg/association.hpp"
#include "vfg/box_regression.hpp"
#include "vfg/crowd_sim.hpp"
#include "vfg/errors.hpp"
#include "vfg/evaluation.hpp"
#include "vfg/geometry.hpp"
#include "vfg/hungarian.hpp"
#include "vfg/nms.hpp"
#include "vfg/odgt_io.hpp"
#include "vfg/random.hpp"
