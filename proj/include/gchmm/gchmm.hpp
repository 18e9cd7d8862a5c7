#pragma once

#include "gchmm/belief_propagation.hpp"
#include "gchmm/bgem.hpp"
#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/eval.hpp"
#include "gchmm/gbw.hpp"
#include "gchmm/gibbs.hpp"
#include "gchmm/io.hpp"
#include "gchmm/likelihood.hpp"
#include "gchmm/model.hpp"
#include "gchmm/newton.hpp"
#include "gchmm/rng.hpp"
