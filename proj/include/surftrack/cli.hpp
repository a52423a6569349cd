#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace surftrack {

enum ExitCode : int { kExitOk = 0, kExitInputError = 1, kExitTrackingLost = 2 };

/// Command line front end. `args` excludes the program name:
///   track  --template --mesh --camera --frames --config --out [--set k=v]... [--dump-relevancy]
///   synth  (--script FILE | --benchmark NAME) --out [--seed N]
///   eval   --results --gt --mesh --out
///   basin  [--template --input --window x0 y0 x1 y1] [--cost C]... [--sigma S]... [--range R] --out
///   sweep  (--sequence DIR | --benchmark NAME) [--config] [--set k=v]... [--cell L:S]... [--jobs N] --out
/// Every command writes manifest.json into its --out directory.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace surftrack
