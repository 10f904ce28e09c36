// Everything in one include.
#pragma once

#include "lpoi/core.hpp"
#include "lpoi/rng.hpp"
#include "lpoi/masking.hpp"
#include "lpoi/losses.hpp"
#include "lpoi/png_io.hpp"
#include "lpoi/listgen.hpp"
#include "lpoi/formats.hpp"
#include "lpoi/surrogate.hpp"
#include "lpoi/synthbench.hpp"
