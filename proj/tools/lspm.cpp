#include <iostream>

#include "lspm/cli.hpp"

int main(int argc, char** argv) { return lspm::run_cli(argc, argv, std::cout, std::cerr); }
