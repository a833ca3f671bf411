#pragma once

#include "cfsl/conformable.hpp"
#include "cfsl/errors.hpp"
#include "cfsl/forward.hpp"
#include "cfsl/integrator.hpp"
#include "cfsl/inverse.hpp"
#include "cfsl/io.hpp"
#include "cfsl/problem.hpp"
#include "cfsl/spectral_data.hpp"
#include "cfsl/spline.hpp"
#include "cfsl/verify.hpp"
