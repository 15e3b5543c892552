#include <iostream>

#include "irl/cli.hpp"

int main(int argc, char** argv) { return irl::cli::run(argc, argv, std::cout, std::cerr); }
