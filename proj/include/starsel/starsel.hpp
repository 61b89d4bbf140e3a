#ifndef STARSEL_STARSEL_HPP
#define STARSEL_STARSEL_HPP

#include "starsel/builder.hpp"
#include "starsel/conditionals.hpp"
#include "starsel/config.hpp"
#include "starsel/data.hpp"
#include "starsel/diagnostics.hpp"
#include "starsel/error.hpp"
#include "starsel/linalg.hpp"
#include "starsel/model.hpp"
#include "starsel/random.hpp"
#include "starsel/reparam.hpp"
#include "starsel/results.hpp"
#include "starsel/sampler.hpp"
#include "starsel/shrinkage.hpp"
#include "starsel/simlab.hpp"
#include "starsel/terms.hpp"

#endif  // STARSEL_STARSEL_HPP
