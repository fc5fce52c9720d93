#include "vfg/cli.hpp"

int main(int argc, char** argv) { return vfg::cli::run_command(argc, argv); }
