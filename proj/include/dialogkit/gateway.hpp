#pragma once

#include "dialogkit/gateway/backend.hpp"
#include "dialogkit/gateway/config.hpp"
#include "dialogkit/gateway/postprocess.hpp"
#include "dialogkit/gateway/prompt.hpp"
#include "dialogkit/gateway/safety.hpp"
#include "dialogkit/gateway/server.hpp"
#include "dialogkit/gateway/service.hpp"
#include "dialogkit/gateway/stats.hpp"
#include "dialogkit/gateway/types.hpp"
