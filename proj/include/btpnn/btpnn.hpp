#pragma once

#include "btpnn/core.hpp"
#include "btpnn/data.hpp"
#include "btpnn/basis.hpp"
#include "btpnn/likelihood.hpp"
#include "btpnn/prior.hpp"
#include "btpnn/samples.hpp"
#include "btpnn/mcmc.hpp"
#include "btpnn/inference.hpp"
#include "btpnn/io.hpp"
#include "btpnn/bench.hpp"
