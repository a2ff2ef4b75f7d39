#include <iostream>

#include "logweight/cli.hpp"

int main(int argc, char** argv) { return logweight::run_cli(argc, argv, std::cout, std::cerr); }
