#include <iostream>

#include "vf/cli/commands.hpp"

int main(int argc, char** argv) { return vf::run_cli(argc, argv, std::cout, std::cerr); }
