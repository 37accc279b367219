#pragma once

#include "tbqst/errors.hpp"
#include "tbqst/linalg.hpp"
#include "tbqst/gellmann.hpp"
#include "tbqst/mzi_model.hpp"
#include "tbqst/count_record.hpp"
#include "tbqst/povm_dedup.hpp"
#include "tbqst/states.hpp"
#include "tbqst/count_sim.hpp"
#include "tbqst/optim.hpp"
#include "tbqst/reconstruct.hpp"
#include "tbqst/metrics.hpp"
#include "tbqst/json_io.hpp"
#include "tbqst/pipeline.hpp"
#include "tbqst/version.hpp"
