#pragma once

#include "epiforecast/errors.hpp"
#include "epiforecast/numerics.hpp"
#include "epiforecast/date.hpp"
#include "epiforecast/csv.hpp"
#include "epiforecast/data.hpp"
#include "epiforecast/dspm.hpp"
#include "epiforecast/nrm.hpp"
#include "epiforecast/svr.hpp"
#include "epiforecast/evaluation.hpp"
#include "epiforecast/pipeline.hpp"
#include "epiforecast/version.hpp"
