#include "npgroup/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return npgroup::cli::run(argc, argv, std::cout, std::cerr); }
