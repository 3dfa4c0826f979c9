#include <iostream>

#include "wpkit/cli.hpp"

int main(int argc, char** argv) { return wpkit::run_cli(argc, argv, std::cout, std::cerr); }
