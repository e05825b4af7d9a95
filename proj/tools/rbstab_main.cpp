#include <iostream>

#include "rbstab/cli.hpp"

int main(int argc, char** argv) { return rbstab::run_cli(argc, argv, std::cout, std::cerr); }
