#include <iostream>

#include "rltmle/cli.hpp"

int main(int argc, char** argv) { return rltmle::cli_main(argc, argv, std::cout, std::cerr); }
