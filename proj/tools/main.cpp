#include <iostream>

#include "aglrls/cli.hpp"

int main(int argc, char** argv) { return aglrls::run_cli(argc, argv, std::cout, std::cerr); }
