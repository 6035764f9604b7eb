#pragma once

#include "coincide/closed_form.hpp"
#include "coincide/coincidence.hpp"
#include "coincide/errors.hpp"
#include "coincide/harness.hpp"
#include "coincide/indep_tests.hpp"
#include "coincide/parallel.hpp"
#include "coincide/rng.hpp"
#include "coincide/simulate.hpp"
#include "coincide/spike_data.hpp"
#include "coincide/stats.hpp"

namespace coincide {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace coincide
