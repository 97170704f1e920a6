#pragma once

#include "levynbe/artifact.hpp"
#include "levynbe/bench.hpp"
#include "levynbe/classical.hpp"
#include "levynbe/data.hpp"
#include "levynbe/deepsets.hpp"
#include "levynbe/dense_net.hpp"
#include "levynbe/ecf.hpp"
#include "levynbe/error.hpp"
#include "levynbe/levy_models.hpp"
#include "levynbe/loss.hpp"
#include "levynbe/nelder_mead.hpp"
#include "levynbe/pipeline.hpp"
#include "levynbe/random.hpp"
#include "levynbe/report_io.hpp"
#include "levynbe/train.hpp"
#include "levynbe/uq.hpp"
