#include <iostream>

#include "eoc/cli.hpp"

int main(int argc, char** argv) { return eoc::run_cli(argc, argv, std::cout, std::cerr); }
