#include <iostream>

#include "planout/cli.hpp"

int main(int argc, char** argv) { return planout::run_cli(argc, argv, std::cout, std::cerr); }
