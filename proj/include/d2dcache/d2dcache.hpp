#ifndef D2DCACHE_D2DCACHE_HPP
#define D2DCACHE_D2DCACHE_HPP

#include "d2dcache/core_model.hpp"
#include "d2dcache/errors.hpp"
#include "d2dcache/montecarlo.hpp"
#include "d2dcache/optimize.hpp"
#include "d2dcache/queueing.hpp"
#include "d2dcache/stochgeo.hpp"
#include "d2dcache/version.hpp"

#endif
