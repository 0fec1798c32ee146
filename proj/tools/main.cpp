#include <iostream>

#include "ccmv/cli.hpp"

int main(int argc, char** argv) { return ccmv::run_cli(argc, argv, std::cout, std::cerr); }
