#pragma once

#include "freqflow/diagnostics.hpp"
#include "freqflow/error.hpp"
#include "freqflow/field.hpp"
#include "freqflow/io.hpp"
#include "freqflow/loss.hpp"
#include "freqflow/model.hpp"
#include "freqflow/rng.hpp"
#include "freqflow/search.hpp"
#include "freqflow/spectral.hpp"
#include "freqflow/synthetic.hpp"
#include "freqflow/util.hpp"
