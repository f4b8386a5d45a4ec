#pragma once

// Umbrella header: the whole library.

#include "retrialq/errors.hpp"
#include "retrialq/io.hpp"
#include "retrialq/model.hpp"
#include "retrialq/weights.hpp"
#include "retrialq/ergodicity.hpp"
#include "retrialq/kolmogorov.hpp"
#include "retrialq/simulate.hpp"
#include "retrialq/version.hpp"
