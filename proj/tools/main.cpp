#include "fppi/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fppi::run_cli(argc, argv, std::cout, std::cerr); }
