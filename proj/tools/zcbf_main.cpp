#include <iostream>

#include "zcbf/cli.hpp"

int main(int argc, char** argv) { return zcbf::cli::run(argc, argv, std::cout, std::cerr); }
