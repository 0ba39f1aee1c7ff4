#pragma once

#include "puaclms/algebra.hpp"
#include "puaclms/arith.hpp"
#include "puaclms/config.hpp"
#include "puaclms/errors.hpp"
#include "puaclms/filter.hpp"
#include "puaclms/harness.hpp"
#include "puaclms/random.hpp"
#include "puaclms/schedule.hpp"
#include "puaclms/signal.hpp"
#include "puaclms/theory.hpp"
