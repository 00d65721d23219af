#pragma once

#include "corpus.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "goaleval.hpp"
#include "imaging.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "png_io.hpp"
#include "rng.hpp"
#include "saepost.hpp"
#include "synthgen.hpp"

namespace scoreforge {

#ifdef SCOREFORGE_VERSION
inline constexpr const char* kVersion = SCOREFORGE_VERSION;
#else
inline constexpr const char* kVersion = "0.3.0";
#endif

} // namespace scoreforge
