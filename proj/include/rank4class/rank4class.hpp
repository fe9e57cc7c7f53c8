// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "rank4class/checkpoint.hpp"
#include "rank4class/data.hpp"
#include "rank4class/error.hpp"
#include "rank4class/eval.hpp"
#include "rank4class/experiment.hpp"
#include "rank4class/grad_check.hpp"
#include "rank4class/losses.hpp"
#include "rank4class/metrics.hpp"
#include "rank4class/model.hpp"
#include "rank4class/ops.hpp"
#include "rank4class/optim.hpp"
#include "rank4class/random.hpp"
#include "rank4class/report.hpp"
#include "rank4class/tape.hpp"
#include "rank4class/tensor.hpp"
#include "rank4class/verify.hpp"
