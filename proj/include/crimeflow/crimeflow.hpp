#pragma once

#include "crimeflow/common.hpp"
#include "crimeflow/flownet.hpp"
#include "crimeflow/forecast/suite.hpp"
#include "crimeflow/geometry.hpp"
#include "crimeflow/ingest.hpp"
#include "crimeflow/panel.hpp"
#include "crimeflow/pglm.hpp"
#include "crimeflow/pglm_report.hpp"
#include "crimeflow/pipeline.hpp"
#include "crimeflow/synthcity.hpp"
#include "crimeflow/time.hpp"
