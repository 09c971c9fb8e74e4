// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pier/corpus.hpp"
#include "pier/costmodel.hpp"
#include "pier/driver.hpp"
#include "pier/error.hpp"
#include "pier/executor.hpp"
#include "pier/gradcheck.hpp"
#include "pier/harness.hpp"
#include "pier/host_store.hpp"
#include "pier/model.hpp"
#include "pier/optim.hpp"
#include "pier/params_io.hpp"
#include "pier/run_config.hpp"
#include "pier/schedule.hpp"
#include "pier/topology.hpp"
#include "pier/trajectory.hpp"
