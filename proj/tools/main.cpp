#include <iostream>

#include "advise/cli.hpp"

int main(int argc, char** argv) { return advise::run_cli(argc, argv, std::cout, std::cerr); }
