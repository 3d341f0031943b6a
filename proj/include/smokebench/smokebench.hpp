#pragma once

#include "smokebench/common.hpp"
#include "smokebench/dcp.hpp"
#include "smokebench/image.hpp"
#include "smokebench/metrics.hpp"
#include "smokebench/physics_head.hpp"
#include "smokebench/scattering.hpp"
#include "smokebench/smoke_synth.hpp"
