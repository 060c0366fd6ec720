#include "mllkm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mllkm::run_cli(argc, argv, std::cout, std::cerr); }
