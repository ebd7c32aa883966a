#pragma once

#include "dllap/archive.hpp"
#include "dllap/error.hpp"
#include "dllap/io.hpp"
#include "dllap/losses.hpp"
#include "dllap/metrics.hpp"
#include "dllap/model.hpp"
#include "dllap/nn_ops.hpp"
#include "dllap/spectral.hpp"
#include "dllap/streaming.hpp"
#include "dllap/verify.hpp"
