#include "slipctl/cli.hpp"

int main(int argc, char** argv) { return slipctl::cli(argc, argv); }
