#ifndef CONFCOH_CONFCOH_HPP
#define CONFCOH_CONFCOH_HPP

#include "common.hpp"
#include "sector_basis.hpp"
#include "density.hpp"
#include "random.hpp"
#include "oses.hpp"
#include "lindblad.hpp"
#include "mpdo.hpp"
#include "tebd.hpp"
#include "state_io.hpp"
#include "checkpoint.hpp"

#endif  // CONFCOH_CONFCOH_HPP
