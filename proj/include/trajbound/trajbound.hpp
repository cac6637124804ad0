#pragma once

#include "trajbound/error.hpp"
#include "trajbound/numerics.hpp"
#include "trajbound/csv.hpp"
#include "trajbound/datasets.hpp"
#include "trajbound/models.hpp"
#include "trajbound/snapshot.hpp"
#include "trajbound/optim.hpp"
#include "trajbound/trajectory.hpp"
#include "trajbound/bounds.hpp"
#include "trajbound/harness/config.hpp"
#include "trajbound/harness/stats.hpp"
#include "trajbound/harness/svg.hpp"
#include "trajbound/harness/experiments.hpp"
