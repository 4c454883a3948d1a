#include <iostream>

#include "gmcsim/cli/commands.hpp"

int main(int argc, char** argv) { return gmcsim::cli::run(argc, argv, std::cout, std::cerr); }
