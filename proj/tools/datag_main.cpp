#include <iostream>

#include "datag/cli.hpp"

int main(int argc, char** argv) { return datag::run_cli(argc, argv, std::cout, std::cerr); }
