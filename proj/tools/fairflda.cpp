#include <iostream>

#include "fairflda/cli.hpp"

int main(int argc, char** argv) { return fairflda::run_cli(argc, argv, std::cout, std::cerr); }
