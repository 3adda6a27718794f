#pragma once

#include <optional>
#include <string>

#include "mars/gateway.hpp"
#include "mars/hybrid.hpp"
#include "mars/strategy.hpp"

namespace mars {

// Everything a pipeline run needs that is not on the command line: model
// bindings per role, the price table, strategy defaults, and the split.
struct Config {
    ModelHandle analyzer;
    ModelHandle synthesizer;
    ModelHandle evaluator;
    StrategyConfig strategy;
    SplitSpec split;

    Config();
};

// Missing path → defaults (mock backend everywhere). Unknown keys rejected
// so typos fail loudly. MARS_API_BASE / MARS_API_KEY environment variables
// override endpoint and credentials for every http handle.
Config load_config(const std::optional<std::string>& path);

} // namespace mars
