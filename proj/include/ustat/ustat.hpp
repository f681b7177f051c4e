#pragma once

#include "ustat/combinatorics.hpp"
#include "ustat/decomposition_lab.hpp"
#include "ustat/distribution.hpp"
#include "ustat/errors.hpp"
#include "ustat/jackknife.hpp"
#include "ustat/kernel.hpp"
#include "ustat/montecarlo.hpp"
#include "ustat/pairwise_sum.hpp"
#include "ustat/processes.hpp"
#include "ustat/report_io.hpp"
#include "ustat/rng.hpp"
#include "ustat/samplers.hpp"
#include "ustat/ustat_engine.hpp"
