// Copyright 2026 The ppaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "ppaudit/audit_core.hpp"
#include "ppaudit/dp_mechanism.hpp"
#include "ppaudit/protocol/auditor.hpp"
#include "ppaudit/protocol/messages.hpp"
#include "ppaudit/protocol/net.hpp"
#include "ppaudit/protocol/platform.hpp"
#include "ppaudit/random.hpp"
#include "ppaudit/sample_planner.hpp"
#include "ppaudit/simulation.hpp"
#include "ppaudit/status.hpp"
#include "ppaudit/synthetic_platform.hpp"
