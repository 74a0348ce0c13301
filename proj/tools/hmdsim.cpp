#include "hmdsim/cli.hpp"

int main(int argc, char** argv) { return hmdsim::run_cli(argc, argv); }
