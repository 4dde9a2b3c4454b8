#ifndef CEN_CEN_HPP
#define CEN_CEN_HPP

#include "cen/config.hpp"
#include "cen/data.hpp"
#include "cen/error.hpp"
#include "cen/evolution.hpp"
#include "cen/inference.hpp"
#include "cen/io.hpp"
#include "cen/label_distribution.hpp"
#include "cen/losses.hpp"
#include "cen/metrics.hpp"
#include "cen/model.hpp"
#include "cen/numerics.hpp"
#include "cen/run.hpp"

#endif
