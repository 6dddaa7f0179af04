#pragma once

// Umbrella header for the graph-based mutually exciting process toolkit.

#include "gbmep/csv.hpp"
#include "gbmep/errors.hpp"
#include "gbmep/event_store.hpp"
#include "gbmep/fit.hpp"
#include "gbmep/geometry.hpp"
#include "gbmep/gof.hpp"
#include "gbmep/ingest.hpp"
#include "gbmep/lbfgs.hpp"
#include "gbmep/likelihood.hpp"
#include "gbmep/model.hpp"
#include "gbmep/parallel.hpp"
#include "gbmep/serialize.hpp"
#include "gbmep/simulate.hpp"
#include "gbmep/timeparse.hpp"
