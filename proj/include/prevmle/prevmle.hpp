#pragma once

#include <prevmle/bin_search.hpp>
#include <prevmle/checksum.hpp>
#include <prevmle/dataset.hpp>
#include <prevmle/density.hpp>
#include <prevmle/error.hpp>
#include <prevmle/experiment.hpp>
#include <prevmle/prevalence.hpp>
#include <prevmle/random.hpp>
#include <prevmle/scorer.hpp>
#include <prevmle/synth.hpp>
