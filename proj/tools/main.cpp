#include <iostream>

#include "mixreg/cli/commands.hpp"

int main(int argc, char** argv) { return mixreg::cli::run(argc, argv, std::cout, std::cerr); }
