#pragma once

#include "run_config.hpp"

namespace ncp::cli {

void cmd_generate(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_sample(const RunConfig& cfg);
void cmd_exact(const RunConfig& cfg);
void cmd_gibbs(const RunConfig& cfg);
void cmd_compare(const RunConfig& cfg);

}  // namespace ncp::cli
