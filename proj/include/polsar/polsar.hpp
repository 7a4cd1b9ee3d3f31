#pragma once

#include "polsar/classifier.hpp"
#include "polsar/config.hpp"
#include "polsar/core.hpp"
#include "polsar/dwt.hpp"
#include "polsar/error.hpp"
#include "polsar/io.hpp"
#include "polsar/mrf.hpp"
#include "polsar/pipeline.hpp"
#include "polsar/png.hpp"
#include "polsar/rng.hpp"
#include "polsar/synth.hpp"
