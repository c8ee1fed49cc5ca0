#pragma once

#include "xmamba/blocks.hpp"
#include "xmamba/errors.hpp"
#include "xmamba/flops.hpp"
#include "xmamba/fusion.hpp"
#include "xmamba/harness.hpp"
#include "xmamba/offsets.hpp"
#include "xmamba/rng.hpp"
#include "xmamba/scan.hpp"
#include "xmamba/selfcheck.hpp"
#include "xmamba/serialize.hpp"
#include "xmamba/ssm.hpp"
#include "xmamba/tensor.hpp"
