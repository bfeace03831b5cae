#pragma once

#include "invset/core.hpp"
#include "invset/datagen.hpp"
#include "invset/error.hpp"
#include "invset/inversion.hpp"
#include "invset/regression.hpp"
#include "invset/scb_bootstrap.hpp"
#include "invset/simharness.hpp"
