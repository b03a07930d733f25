#pragma once

#include "sbs/types.hpp"
#include "sbs/lattice.hpp"
#include "sbs/pattern.hpp"
#include "sbs/kernels.hpp"
#include "sbs/state.hpp"
#include "sbs/cache.hpp"
#include "sbs/hamiltonian.hpp"
#include "sbs/stats.hpp"
#include "sbs/sampler.hpp"
#include "sbs/exact.hpp"
#include "sbs/enumerate.hpp"
#include "sbs/reweight.hpp"
#include "sbs/optimizer.hpp"
#include "sbs/timing.hpp"
#include "sbs/checkpoint.hpp"
#include "sbs/config.hpp"
#include "sbs/selfcheck.hpp"
#include "sbs/commands.hpp"
