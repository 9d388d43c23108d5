#include "sysprobe/cli.hpp"

int main(int argc, char** argv) { return sysprobe::cli::run_cli(argc, argv); }
