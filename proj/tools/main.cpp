#include "irislab/cli.hpp"

int main(int argc, char** argv) { return irislab::run_cli(argc, argv); }
