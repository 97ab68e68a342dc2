#pragma once

// Umbrella header for the stereo dataset generation toolkit.

#include "stereogen/bvh.hpp"
#include "stereogen/colmap.hpp"
#include "stereogen/colormap.hpp"
#include "stereogen/common.hpp"
#include "stereogen/dataset.hpp"
#include "stereogen/eval.hpp"
#include "stereogen/image.hpp"
#include "stereogen/mesh.hpp"
#include "stereogen/observability.hpp"
#include "stereogen/pfm.hpp"
#include "stereogen/ply.hpp"
#include "stereogen/png_io.hpp"
#include "stereogen/splat_render.hpp"
#include "stereogen/splats.hpp"
#include "stereogen/stereo.hpp"
