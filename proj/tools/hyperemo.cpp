#include <iostream>

#include "hyperemo/cli.hpp"

int main(int argc, char** argv) { return hyperemo::cli::run(argc, argv, std::cout, std::cerr); }
