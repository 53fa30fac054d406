#pragma once

// Umbrella header.

#include "toponet/btf.hpp"
#include "toponet/btf_io.hpp"
#include "toponet/buffer_api.hpp"
#include "toponet/error.hpp"
#include "toponet/gradcheck.hpp"
#include "toponet/grid.hpp"
#include "toponet/io.hpp"
#include "toponet/losses.hpp"
#include "toponet/matching.hpp"
#include "toponet/metrics.hpp"
#include "toponet/persistence.hpp"
#include "toponet/serialize.hpp"
