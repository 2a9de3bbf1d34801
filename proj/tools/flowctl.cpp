#include "flowam/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return flowam::run_cli(argc, argv, std::cout, std::cerr); }
