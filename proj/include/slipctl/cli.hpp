#pragma once

namespace slipctl {

/// Entry point of the slipctl command-line tool; returns the process exit code.
int cli(int argc, char** argv);

}  // namespace slipctl
