// Umbrella header.

#pragma once

#include "csid/bundle.hpp"
#include "csid/colorspace.hpp"
#include "csid/common.hpp"
#include "csid/config.hpp"
#include "csid/dataset.hpp"
#include "csid/diagnostics.hpp"
#include "csid/embedding.hpp"
#include "csid/eval.hpp"
#include "csid/features.hpp"
#include "csid/gamut.hpp"
#include "csid/gda.hpp"
#include "csid/image.hpp"
#include "csid/image_io.hpp"
#include "csid/mlr.hpp"
#include "csid/parallel.hpp"
#include "csid/pipeline.hpp"
#include "csid/rng.hpp"
