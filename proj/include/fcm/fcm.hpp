// Umbrella header for the fuzzy cognitive map library.
#pragma once

#include "fcm/analysis.hpp"
#include "fcm/core.hpp"
#include "fcm/error.hpp"
#include "fcm/io.hpp"
#include "fcm/templates.hpp"
