#ifndef SBD_SBD_HPP
#define SBD_SBD_HPP

#include "sbd/discretized_chain.hpp"
#include "sbd/engine.hpp"
#include "sbd/error.hpp"
#include "sbd/heuristics.hpp"
#include "sbd/network_state.hpp"
#include "sbd/queues.hpp"
#include "sbd/random.hpp"
#include "sbd/simulator.hpp"
#include "sbd/spatial_stats.hpp"
#include "sbd/statistics.hpp"
#include "sbd/torus.hpp"

#endif  // SBD_SBD_HPP
