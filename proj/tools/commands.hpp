#pragma once

#include <string>

#include "run_config.hpp"

namespace qdemu::cli {

int cmd_simulate(const RunConfig& rc);
int cmd_curriculum(const RunConfig& rc);
int cmd_train(const RunConfig& rc);
int cmd_rollout(const RunConfig& rc);
int cmd_evaluate(const RunConfig& rc);
int cmd_sweep(const RunConfig& rc);
int cmd_interpret(const RunConfig& rc);
int cmd_inspect(const std::string& path);
// table1 | fig4 | fig5 | s8
int cmd_reproduce(const RunConfig& rc, const std::string& target);

}  // namespace qdemu::cli
