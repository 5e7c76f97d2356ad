#include "hitrade/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return hitrade::run_cli(argc, argv, std::cout, std::cerr); }
