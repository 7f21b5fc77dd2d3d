#pragma once

// Umbrella include for the whole library.

#include "ipaeval/client_info.hpp"
#include "ipaeval/core.hpp"
#include "ipaeval/dataset.hpp"
#include "ipaeval/decode.hpp"
#include "ipaeval/engine.hpp"
#include "ipaeval/errors.hpp"
#include "ipaeval/gateway.hpp"
#include "ipaeval/http_provider.hpp"
#include "ipaeval/metrics.hpp"
#include "ipaeval/outcome.hpp"
#include "ipaeval/prompts.hpp"
#include "ipaeval/psychometric.hpp"
#include "ipaeval/records.hpp"
#include "ipaeval/runner.hpp"
