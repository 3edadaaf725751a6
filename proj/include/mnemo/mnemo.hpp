#pragma once

// Umbrella header.
#include "mnemo/action_parser.hpp"
#include "mnemo/agent.hpp"
#include "mnemo/config.hpp"
#include "mnemo/core.hpp"
#include "mnemo/embeddings.hpp"
#include "mnemo/error.hpp"
#include "mnemo/fixtures.hpp"
#include "mnemo/hindsight.hpp"
#include "mnemo/json_io.hpp"
#include "mnemo/math_expr.hpp"
#include "mnemo/memory.hpp"
#include "mnemo/optimizer.hpp"
#include "mnemo/records.hpp"
#include "mnemo/remote_embedding.hpp"
#include "mnemo/rewards.hpp"
#include "mnemo/sim.hpp"
#include "mnemo/store.hpp"
#include "mnemo/text.hpp"
#include "mnemo/toy_policy.hpp"
