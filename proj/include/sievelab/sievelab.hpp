#pragma once

#include "sievelab/condition_audit.hpp"
#include "sievelab/errors.hpp"
#include "sievelab/model_core.hpp"
#include "sievelab/numerics.hpp"
#include "sievelab/parallel.hpp"
#include "sievelab/posterior.hpp"
#include "sievelab/regression_bridge.hpp"
#include "sievelab/rng.hpp"
#include "sievelab/risk_lab.hpp"
#include "sievelab/sieve_prior.hpp"
