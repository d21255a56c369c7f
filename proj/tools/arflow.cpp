#include <iostream>

#include "arflow/cli.hpp"

int main(int argc, char** argv) { return arflow::cli::run(argc, argv, std::cout, std::cerr); }
