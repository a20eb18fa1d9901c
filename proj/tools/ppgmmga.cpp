#include <iostream>

#include "ppgmm/cli.hpp"

int main(int argc, char** argv) { return ppgmm::run_cli(argc, argv, std::cout, std::cerr); }
